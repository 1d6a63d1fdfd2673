#ifndef BIOAGE_ERRORS_HPP
#define BIOAGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bioage {

// Parameter outside its admissible range; message names the violated inequality.
struct RangeError : std::invalid_argument {
    explicit RangeError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation requires linear jump families (the moments cascade is only
// closed for multiplicative jumps).
struct UnsupportedFamilyError : std::invalid_argument {
    explicit UnsupportedFamilyError(const std::string& what) : std::invalid_argument(what) {}
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureError : std::runtime_error {
    explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

// Equilibrium product requested over a range containing chi_k <= 0.
struct SignError : std::runtime_error {
    explicit SignError(const std::string& what) : std::runtime_error(what) {}
};

// The chi_k sign sequence is not (+...+ -...-); signals a numerical problem
// or a chi_k indistinguishable from zero.
struct PatternError : std::runtime_error {
    explicit PatternError(const std::string& what) : std::runtime_error(what) {}
};

struct CflError : std::invalid_argument {
    explicit CflError(const std::string& what) : std::invalid_argument(what) {}
};

struct BinningMismatchError : std::invalid_argument {
    explicit BinningMismatchError(const std::string& what) : std::invalid_argument(what) {}
};

// Configuration document could not be parsed; carries line/key context.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bioage

#endif
