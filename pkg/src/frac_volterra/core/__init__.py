# Core module - special functions, psi-calculus, solvers and bounds
