#pragma once

#include <filesystem>

#include "railpad/ingest.hpp"

namespace railpad {

enum class PassageFormat { Csv, Binary };

/// Text header (`# key=value` lines) followed by `index,accel_g,wheel_pulse`
/// rows. Doubles use the shortest round-trip representation.
void write_passage_csv(const std::filesystem::path& path, const PassageRecord& record);
/// Same text header after a magic line, then little-endian float64 samples
/// and uint64 pulse indices.
void write_passage_binary(const std::filesystem::path& path, const PassageRecord& record);
void write_passage(const std::filesystem::path& path, const PassageRecord& record, PassageFormat format);

/// Detects the container from its first line.
PassageRecord read_passage(const std::filesystem::path& path);
/// Reads only the header; cheap enough for screening large directories.
PassageMeta read_passage_meta(const std::filesystem::path& path);

}  // namespace railpad
