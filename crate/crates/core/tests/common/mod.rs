#![allow(dead_code)]

pub mod network;
