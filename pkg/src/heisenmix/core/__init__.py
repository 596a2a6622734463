"""
heisenmix Core Modules

Numerics and run plumbing, organized by concern:
- hgroup: Group law, dilations, gauge norm and gauge balls
- hcalculus: Horizontal fields, gradients and Hessians of closed-form functions
- pucci: Extremal operators and their optimizing coefficient matrices
- fracsublap: Annular quadrature for the fractional sub-Laplacian
- fields: Solver grids and grid fields with exterior data
- mixedop: The mixed operator, pointwise and assembled on grids
- convolution: Sup- and inf-convolutions with the quartic gauge kernel
- barrier: Barrier family, certified search for C and term decomposition
- solver: Dirichlet solves and viscosity inequality checks
- regularity: Dyadic oscillation profiles and Holder fits
- functions: Registry of closed-form test functions
- probes: Randomized property suites
- configuration: Run configuration loading and validation
- errors: Exception hierarchy
- reporting: Rich console output and progress
- output_management: Run directories and CSV/JSON writers
- signal_handling: Graceful interrupt handling
"""
