#pragma once

// Component payloads are gzip-compressed ustar archives with a manifest.json
// at the root. Packing is deterministic: entries sorted by path, zero
// mtime/uid/gid, so identical trees yield identical bytes and hashes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cb/core/canonical.hpp"

namespace cb::archive {

struct Entry {
    std::string path;  // relative, '/'-separated
    std::string data;
    std::uint32_t mode = 0644;
};

inline constexpr std::string_view kManifestName = "manifest.json";

std::string pack(std::vector<Entry> entries);

/// Throws Error(CorruptArchive) on any framing, checksum or path problem.
std::vector<Entry> unpack(std::string_view bytes);

std::string gzip(std::string_view raw);
std::string gunzip(std::string_view compressed);

const Entry* find(const std::vector<Entry>& entries, std::string_view path);

/// Writes entries under `dir`, preserving the executable bit.
void extract(const std::vector<Entry>& entries, const std::filesystem::path& dir);

/// Reads every regular file below `dir` (recursively) as entries.
std::vector<Entry> read_tree(const std::filesystem::path& dir);

struct Manifest {
    Descriptor descriptor;
    Json metadata = Json::object();  // title, description, license
};

/// Parses manifest.json from the unpacked entries; CorruptArchive if absent or malformed.
Manifest read_manifest(const std::vector<Entry>& entries);
std::string write_manifest(const Manifest& m);

/// Checks that the payload carries what the descriptor declares: the entrypoint
/// for models and metrics, and a byte-identical file for every dataset file.
void check_payload(const Descriptor& descriptor, const std::vector<Entry>& entries);

/// Path of the entry whose sha256 equals `content_hash`, or nullptr.
const Entry* find_by_hash(const std::vector<Entry>& entries, std::string_view content_hash);

}  // namespace cb::archive
