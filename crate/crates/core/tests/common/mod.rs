#![allow(dead_code)]

pub mod data;
pub mod fd;
pub mod ieee;
pub mod oracle;
