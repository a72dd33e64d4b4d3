#pragma once

#include <stdexcept>
#include <string>

namespace sfbm {

// Invalid model or algorithm parameters (H = 1/2, beta outside its window, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A function was evaluated outside its declared validity domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-integrable singularity inside an integration range.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Numerical procedure did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Monte Carlo run exceeded its abort budget.
class RunFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sfbm
