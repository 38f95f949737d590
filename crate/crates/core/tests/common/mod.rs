#![allow(dead_code)]

pub mod forms_check;
pub mod oracle;
