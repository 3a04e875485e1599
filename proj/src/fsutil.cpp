// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/fsutil.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "dynsurf/errors.hpp"

namespace dynsurf {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof())
    throw IoError("read failed on " + path.string());
  return std::move(buf).str();
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out.good()) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " +
                  ec.message());
}

}  // namespace dynsurf
