// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

namespace dynsurf {

// Whole-file IO with atomic replace on write (temp file + rename), so a
// crashed run never leaves a half-written artifact behind.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace dynsurf
