#pragma once

#include <stdexcept>
#include <string>

namespace detnas {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration / validation problems (bad schedules, invalid architecture
// for a space, infeasible settings). Maps to CLI exit code 2.
struct ConfigError : Error { using Error::Error; };

// Text that could not be parsed (architectures, spaces, config files).
struct ParseError : Error { using Error::Error; };

// Tensor shape mismatch; the message names both shapes.
struct ShapeError : Error { using Error::Error; };

// Non-finite values encountered at runtime. Maps to CLI exit code 3.
struct NumericError : Error { using Error::Error; };

// Constrained sampling exhausted its resample budget or the constraint
// is unsatisfiable.
struct ConstraintError : Error { using Error::Error; };

// Pretrain -> finetune -> search ordering violated.
struct PhaseError : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

}  // namespace detnas
