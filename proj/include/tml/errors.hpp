#pragma once

#include <stdexcept>
#include <string>

namespace tml {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error("checkpoint error: " + msg) {}
};

struct ChecksumError : CheckpointError {
    explicit ChecksumError(const std::string& msg) : CheckpointError("checksum: " + msg) {}
};

struct VersionError : CheckpointError {
    explicit VersionError(const std::string& msg) : CheckpointError("version: " + msg) {}
};

struct TruncationError : CheckpointError {
    explicit TruncationError(const std::string& msg) : CheckpointError("truncated: " + msg) {}
};

}  // namespace tml
