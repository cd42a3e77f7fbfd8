pub mod attractor;
pub mod basin;
pub mod cases;
pub mod error;
pub mod fode;
pub mod lyapunov;
pub mod rk;
pub mod stability;
pub mod sweep;
pub mod system;

pub use error::{Error, Result};
pub use rk::{integrate, integrate_pair, IntegratorConfig, Trajectory};
pub use system::{eval_jacobian, eval_rhs, mirror, Jacobian3, State3, SystemParams};
