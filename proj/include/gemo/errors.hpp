// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gemo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A mask left no valid entry in a set that must be normalized or pooled.
class InvalidMaskError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Vector norm too close to zero for a direction to be defined.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gemo
