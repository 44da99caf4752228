#pragma once

#include <string>

#include "tsproto/core.hpp"

namespace tsproto {

/**
 * Reads a dataset file, accepting both the text format and the `PTS1`
 * binary variant (sniffed from the magic bytes). Masks whose entries are
 * all 0/1 are flagged raw, any other mask is treated as filtered weights.
 * Throws std::runtime_error on malformed input.
 */
Dataset read_dataset(const std::string& path);

/**
 * Text format: header `T=<int>,C=<int>,N=<int>,labeled=<0|1>`, then per
 * series one CSV line of T*C values time-major, one CSV line of T mask
 * weights and, if labeled, one line with the integer label. Values are
 * printed with 17 significant digits so a write/read cycle is bit-exact.
 */
void write_dataset(const Dataset& data, const std::string& path);

/** Binary variant: same field order, little-endian 32-bit floats, magic `PTS1`. */
void write_dataset_binary(const Dataset& data, const std::string& path);

}  // namespace tsproto
