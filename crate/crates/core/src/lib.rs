pub mod cli;
pub mod combiners;
pub mod data;
pub mod error;
pub mod mapping;
pub mod par;
pub mod primitive;
pub mod sample;
pub mod set;
pub mod structures;
pub mod verify;
