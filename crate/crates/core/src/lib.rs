pub mod contrastive;
pub mod decimal;
pub mod ground;
pub mod pddl;
pub mod plan;
pub mod planner;
pub mod session;
pub mod sim;
