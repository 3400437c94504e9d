pub mod algebroid;
pub mod eform;
pub mod fieldcalc;
pub mod flow;
pub mod gauge;
pub mod io;
pub mod morphism;
pub mod psm;
pub mod random;
pub mod symexpr;
