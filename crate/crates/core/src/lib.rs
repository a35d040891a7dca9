pub mod czdecomp;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod lpvar;
pub mod operators;
pub mod space;
pub mod weights;
