#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hybridtrack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

enum class ErrorCode {
    InvalidDimension,
    InvalidSystem,
    NotInJumpSet,
    OutsideStateSpace,
    EscapeDetected,
    IntegratorStall,
    ZenoLimit,
    EmptyDomain,
    OracleAccuracy,
    AttributionAmbiguous,
    SingularDesign,
    InvalidGeometry,
    AssumptionViolated,
    OutOfHorizon,
    ConfigError,
};

const char* to_string(ErrorCode code);

class HybridError : public std::runtime_error {
public:
    HybridError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace hybridtrack
