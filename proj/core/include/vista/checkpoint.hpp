#pragma once

#include <filesystem>

#include "vista/params.hpp"

namespace vista {

/// Current on-disk format version.
inline constexpr int kCheckpointVersion = 1;

/// Layout: "vista-checkpoint <version>\n", "count <n>\n", n manifest lines
/// "<name> <d0> <d1> ...\n", then the n tensors in serialized tensor form.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);

/// Errors: kVersionMismatch, kCorrupt (naming the first incomplete tensor).
ParamSet load_checkpoint(const std::filesystem::path& path);

/// As above, then checks names and shapes against `expected`; a difference
/// raises kManifestMismatch listing missing, extra and reshaped entries.
ParamSet load_checkpoint(const std::filesystem::path& path, const ParamSet& expected);

}  // namespace vista
