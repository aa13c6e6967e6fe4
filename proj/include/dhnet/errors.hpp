#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dhnet {

// Nonlinear solve did not converge; carries the residual history.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, std::vector<double> history = {})
        : std::runtime_error(what), residual_history(std::move(history)) {}
    std::vector<double> residual_history;
};

// Power demanded at a consumer but no energy-density drop available.
class InfeasibleClosureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A port-Hamiltonian structure identity failed (e.g. R not PSD).
class StructureViolationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Network or scenario file does not satisfy the schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dhnet
