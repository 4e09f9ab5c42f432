pub mod battery;
pub mod cycle;
pub mod dynamics;
pub mod engine;
pub mod drivetrain;
pub mod controller;
pub mod predictor;
pub mod sim;
pub mod config;
pub mod cli;
