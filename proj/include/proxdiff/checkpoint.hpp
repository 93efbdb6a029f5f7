#pragma once

#include <stdexcept>
#include <string>

#include "proxdiff/net.hpp"

namespace proxdiff {

// Load/save failures carry a machine-checkable kind alongside the message.
struct CheckpointError : std::runtime_error {
  enum class Kind { Io, Magic, Version, Truncated, Checksum, Descriptor };

  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Self-describing binary checkpoint: magic, format version, architecture
// descriptor, schedule constants, supported step grid, raw float64
// little-endian parameter vector, and a trailing checksum over everything
// before it.
void save_checkpoint(const Net& net, const std::string& path);

Net load_checkpoint(const std::string& path);

// As load_checkpoint, but rejects (Kind::Descriptor) checkpoints whose net
// kind differs from what the caller needs.
Net load_checkpoint_expect(const std::string& path, NetKind expected);

}  // namespace proxdiff
