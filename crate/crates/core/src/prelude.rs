#![allow(unused_imports)]
// Shared imports. `Float` supplies ln/exp/etc. when std is not linked; when
// something else in the graph pulls std in, the inherent methods win.
#[allow(unused_imports)]
pub(crate) use num_traits::Float;

pub(crate) use alloc::boxed::Box;
pub(crate) use alloc::format;
pub(crate) use alloc::string::{String, ToString};
pub(crate) use alloc::vec;
pub(crate) use alloc::vec::Vec;
