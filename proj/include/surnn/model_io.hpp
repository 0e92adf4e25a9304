#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "surnn/models.hpp"

namespace surnn {

using AnyModel = std::variant<UniRnnlm, BiRnnlm, SuRnnlm>;

const ModelConfig& model_config(const AnyModel& model);

// Text container: a key/value header followed by named tensors whose values
// are written as hexadecimal floats, so a save/load cycle is bit-exact.
// The layout is documented in docs/formats.md.
void write_model(const AnyModel& model, std::ostream& out);
void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel read_model(std::istream& in, const std::string& source = "<stream>");
AnyModel load_model(const std::filesystem::path& path);

}  // namespace surnn
