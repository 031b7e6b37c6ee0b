pub mod check;
pub mod eval;
pub mod fig1;
pub mod fig2;
pub mod fig3;
pub mod fit;
pub mod loss_show;
