#include "vista/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vista/error.hpp"

namespace vista {
namespace {

constexpr std::string_view kMagic = "vista-checkpoint";

struct ManifestEntry {
  std::string name;
  std::vector<std::size_t> dims;
};

std::string dims_text(const std::vector<std::size_t>& dims) {
  return Shape(dims).to_string();
}

}  // namespace

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint '" + path.string() + "'");
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "count " << params.size() << '\n';
  for (const auto& [name, t] : params.entries()) {
    if (name.find_first_of(" \t\n") != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "parameter name '" + name + "' contains whitespace");
    }
    out << name;
    for (std::size_t d : t.shape().dims()) out << ' ' << d;
    out << '\n';
  }
  for (const auto& entry : params.entries()) write_tensor(out, entry.second);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kCorrupt, path.string() + ": empty checkpoint");
  }
  std::istringstream head(line);
  std::string magic;
  int version = -1;
  head >> magic >> version;
  if (magic != kMagic) {
    throw Error(ErrorCode::kCorrupt, path.string() + ": not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                path.string() + ": checkpoint version " + std::to_string(version) +
                    ", this build reads version " +
                    std::to_string(kCheckpointVersion));
  }

  std::size_t count = 0;
  {
    std::string word;
    if (!std::getline(in, line) || !(std::istringstream(line) >> word >> count) ||
        word != "count") {
      throw Error(ErrorCode::kCorrupt, path.string() + ": bad manifest header");
    }
  }
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kCorrupt, path.string() + ": manifest truncated after " +
                                           std::to_string(i) + " entries");
    }
    std::istringstream ls(line);
    ManifestEntry e;
    ls >> e.name;
    std::size_t d = 0;
    while (ls >> d) e.dims.push_back(d);
    if (e.name.empty() || e.dims.empty()) {
      throw Error(ErrorCode::kCorrupt, path.string() + ": bad manifest line '" + line + "'");
    }
    manifest.push_back(std::move(e));
  }

  ParamSet out;
  for (const auto& e : manifest) {
    Tensor t;
    try {
      t = read_tensor(in);
    } catch (const Error& err) {
      throw Error(ErrorCode::kCorrupt, path.string() + ": tensor '" + e.name + "' " +
                                           dims_text(e.dims) + " is incomplete (" +
                                           err.what() + ")");
    }
    if (t.shape().dims() != e.dims) {
      throw Error(ErrorCode::kCorrupt,
                  path.string() + ": tensor '" + e.name + "' has shape " +
                      t.shape().to_string() + ", manifest says " + dims_text(e.dims));
    }
    out.add(e.name, std::move(t));
  }
  return out;
}

ParamSet load_checkpoint(const std::filesystem::path& path, const ParamSet& expected) {
  ParamSet loaded = load_checkpoint(path);
  std::vector<std::string> missing, extra, reshaped;
  for (const auto& [name, t] : expected.entries()) {
    if (!loaded.contains(name)) {
      missing.push_back(name);
    } else if (loaded.at(name).shape() != t.shape()) {
      reshaped.push_back(name + " " + loaded.at(name).shape().to_string() + " vs " +
                         t.shape().to_string());
    }
  }
  for (const auto& entry : loaded.entries()) {
    if (!expected.contains(entry.first)) extra.push_back(entry.first);
  }
  if (missing.empty() && extra.empty() && reshaped.empty()) {
    // Reorder to match the expected layout.
    ParamSet ordered;
    for (const auto& entry : expected.entries()) {
      ordered.add(entry.first, loaded.at(entry.first));
    }
    return ordered;
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s.empty() ? std::string("none") : s;
  };
  throw Error(ErrorCode::kManifestMismatch,
              path.string() + ": architecture mismatch; missing: " + join(missing) +
                  "; extra: " + join(extra) + "; shape differs: " + join(reshaped));
}

}  // namespace vista
