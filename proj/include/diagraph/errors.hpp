#pragma once

#include <stdexcept>
#include <string>

namespace diagraph {

// Malformed input document. Message names the offending element where known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// An id refers to something that does not exist.
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

// A graph violates its structural contract (e.g. grouping cycle).
struct StructureError : std::runtime_error {
  explicit StructureError(const std::string& msg) : std::runtime_error(msg) {}
};

// Polygon too degenerate to carry area/hull/solidity.
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor operands with incompatible shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (double finalize, scheme mismatch, ...).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Infeasible or inconsistent run configuration.
struct SpecError : std::runtime_error {
  explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Labels out of range or missing.
struct LabelError : std::runtime_error {
  explicit LabelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corpus indexing problems (missing labels, unreadable layout).
struct IndexError : std::runtime_error {
  explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

// Report assembly problems (mismatched run counts, empty input).
struct ReportError : std::runtime_error {
  explicit ReportError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace diagraph
