#pragma once

#include <stdexcept>
#include <string>

namespace bev {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Single-view metrology failures.
struct HorizonSingularityError : Error { using Error::Error; };
struct BehindCameraError : Error { using Error::Error; };
struct DegenerateHeadingError : Error { using Error::Error; };
struct DegenerateStepError : Error { using Error::Error; };
struct NoMeasurementError : Error { using Error::Error; };

// Graph construction failures.
struct GraphError : Error { using Error::Error; };
struct DuplicateNodeError : GraphError { using GraphError::GraphError; };
struct MissingEndpointError : GraphError { using GraphError::GraphError; };
struct KindMismatchError : GraphError { using GraphError::GraphError; };
struct BadInformationError : GraphError { using GraphError::GraphError; };

// Solver failures.
struct GaugeError : Error { using Error::Error; };
struct NumericalFailureError : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace bev
