#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mdae {

// Structural failures carry a certificate: the equations and variables of
// the offending DM part (by display name), when one is available.
struct StructuralError : std::runtime_error {
    enum Kind {
        StructurallySingular,
        NonConvergent,
        NoAdmissibleMatching,
        UnrescalableEquation,
        Rule1Violation,
        UndefinedRename,
        NotRelated,
        NoTransition,
    };
    Kind kind;
    std::vector<std::string> cert_equations;
    std::vector<std::string> cert_variables;

    StructuralError(Kind k, const std::string& msg, std::vector<std::string> eqs = {}, std::vector<std::string> vars = {})
        : std::runtime_error(msg), kind(k), cert_equations(std::move(eqs)), cert_variables(std::move(vars)) {}
};

inline const char* kind_name(StructuralError::Kind k) {
    switch (k) {
    case StructuralError::StructurallySingular: return "StructurallySingular";
    case StructuralError::NonConvergent: return "NonConvergent";
    case StructuralError::NoAdmissibleMatching: return "NoAdmissibleMatching";
    case StructuralError::UnrescalableEquation: return "UnrescalableEquation";
    case StructuralError::Rule1Violation: return "Rule1Violation";
    case StructuralError::UndefinedRename: return "UndefinedRename";
    case StructuralError::NotRelated: return "NotRelated";
    case StructuralError::NoTransition: return "NoTransition";
    }
    return "?";
}

struct NumericError : std::runtime_error {
    enum Kind { SingularJacobian, NonConvergence, InfiniteOffset };
    Kind kind;
    NumericError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

}  // namespace mdae
