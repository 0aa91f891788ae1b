pub mod model;
pub mod sysid;

pub use model::*;
pub use sysid::{identify_params, SysIdError, SysIdOptions, SysIdResult};
