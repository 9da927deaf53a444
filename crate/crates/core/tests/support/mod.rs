#![allow(dead_code)]
pub mod rules;
pub mod linemap;
pub mod fpr;
pub mod corpus;
pub mod selection;
pub mod transcript;
