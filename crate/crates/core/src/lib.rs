pub mod fsm;
pub mod message;
pub mod monitor;
pub mod projection;
pub mod scenarios;
pub mod scribble;
pub mod transport;
