#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tnfo {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A precondition on a function argument was violated (non-positive diameter,
// inverted insulation layers, negative flow where physics demands forward flow, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

// A plant was evaluated with steam on the inlet or a load with water on the
// inlet: the phase-change bookkeeping of the power balance requires
// T_in <= 373.15 K <= T_out at plants and the reverse ordering at loads.
struct PhaseOrderViolation : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// Insulation layer diameters out of order (need 0 < d_a < d_b < d_c).
struct InvalidGeometry : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// A quantity that must be strictly positive (pressure, temperature, diameter) was not.
struct NonpositiveInput : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};
struct NonpositiveDiameter : NonpositiveInput {
  using NonpositiveInput::NonpositiveInput;
};

// Synthetic-network request that no network can satisfy (more pumps than return pipes, ...).
struct InfeasibleSpec : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// One network validation finding. build_network collects every finding before failing.
struct Violation {
  enum class Code {
    DuplicateId,
    DanglingJunctionRef,
    DisconnectedGraph,
    PumpOnOutgoingPipe,
    PlantlessNetwork,
    EmptyComponent,
    JunctionDegree,
    NonPositiveQuantity,
    BoundsOrder,
  };
  Code code;
  std::string message;
};

struct ValidationError : Error {
  std::vector<Violation> violations;
  explicit ValidationError(std::vector<Violation> v);
};

// Lookup of a junction / edge / load id that the network does not contain.
struct UnknownIdError : Error {
  using Error::Error;
};

// The simulation setpoint assignment does not leave a square system.
struct NonSquareSystemError : Error {
  using Error::Error;
};

// A residual or Jacobian evaluation produced NaN/Inf; the message names the entry.
struct NonFiniteValueError : Error {
  using Error::Error;
};

// A scenario reduced total demand to zero where a demand-relative quantity was requested.
struct ZeroDemandError : Error {
  using Error::Error;
};

// A scenario refers to entities the target network does not have.
struct ScenarioMismatch : Error {
  using Error::Error;
};
struct UnknownLoad : ScenarioMismatch {
  using ScenarioMismatch::ScenarioMismatch;
};

// File/format errors.
struct ParseError : Error {
  using Error::Error;
};
struct SchemaError : ParseError {
  using ParseError::ParseError;
};
struct SchemaVersionMismatch : SchemaError {
  using SchemaError::SchemaError;
};
struct UnitError : ParseError {
  using ParseError::ParseError;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace tnfo
