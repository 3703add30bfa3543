#pragma once

#include <stdexcept>
#include <string>

namespace thinspec {

// Every error message is prefixed "module.operation: ..." so failures can be
// traced back to the layer that raised them.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parse_error : error {
    std::size_t offset;
    parse_error(const std::string& msg, std::size_t at) : error(msg), offset(at) {}
};

struct eval_error : error {
    using error::error;
};

// Ellipticity or positivity of a coefficient failed at a concrete point.
struct ellipticity_error : error {
    using error::error;
};

// Compatibility condition of a cell problem violated beyond tolerance.
struct solvability_error : error {
    using error::error;
};

// Coinciding eigenvalues where the construction requires distinct ones.
struct degeneracy_error : error {
    using error::error;
};

struct convergence_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

} // namespace thinspec
