#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace irisforge {

// 64-bit FNV-1a over raw bytes; stable across platforms with the same
// endianness, used for content hashes in manifests and checkpoints.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

// splitmix64 mixing of (seed, index); per-sample seed derivation.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

std::string_view hex64(std::uint64_t value, char (&buf)[17]);
std::string hex64(std::uint64_t value);

}  // namespace irisforge
