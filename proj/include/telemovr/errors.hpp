#pragma once

#include <stdexcept>
#include <string>

namespace telemovr {

// Precondition or model-domain violation (invalid cell, negative kappa, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Unreadable/unwritable files and malformed configuration documents.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the fitters when an internal consistency check fails, e.g. an EM
// iteration that lowers the observed log-likelihood.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace telemovr
