#![allow(dead_code)]

pub mod brute;
pub mod criteria;
pub mod hp;
