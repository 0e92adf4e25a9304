#include "surnn/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "surnn/error.hpp"

namespace surnn {

namespace {

constexpr const char* kMagic = "surnn-model";
constexpr int kVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

template <typename Model>
ParamList params_of(const Model& model) {
  // params() hands out mutable views; writing only reads through them.
  return const_cast<Model&>(model).params();
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::vector<std::string> next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) fail(std::string("unexpected end of file, expected ") + expecting);
    ++lineno_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return split_words(line);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(what, source_ + ":" + std::to_string(lineno_));
  }

  long long integer(const std::string& tok) const {
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (tok.empty() || *end != '\0') fail("expected an integer, got '" + tok + "'");
    return v;
  }

  double real(const std::string& tok) const {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0') fail("expected a number, got '" + tok + "'");
    return v;
  }

  long long field(const char* key) {
    auto toks = next(key);
    if (toks.size() != 2 || toks[0] != key) fail(std::string("expected '") + key + " <value>'");
    return integer(toks[1]);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t lineno_ = 0;
};

template <typename Model>
Model read_tensors(LineReader& r, const ModelConfig& cfg) {
  Model model(cfg);
  auto params = model.params();
  const auto declared = r.field("tensors");
  if (declared != static_cast<long long>(params.size())) {
    r.fail("expected " + std::to_string(params.size()) + " tensors for this architecture, header says " +
           std::to_string(declared));
  }
  for (auto& p : params) {
    auto head = r.next("tensor header");
    if (head.size() != 4 || head[0] != "tensor") r.fail("expected 'tensor <name> <rows> <cols>'");
    if (head[1] != p.name) r.fail("expected tensor '" + p.name + "', found '" + head[1] + "'");
    if (r.integer(head[2]) != p.rows || r.integer(head[3]) != p.cols) {
      r.fail("tensor '" + p.name + "' should be " + std::to_string(p.rows) + "x" +
             std::to_string(p.cols));
    }
    for (Index row = 0; row < p.rows; ++row) {
      auto vals = r.next("tensor row");
      if (static_cast<Index>(vals.size()) != p.cols) {
        r.fail("tensor '" + p.name + "' row has " + std::to_string(vals.size()) + " values, expected " +
               std::to_string(p.cols));
      }
      for (Index col = 0; col < p.cols; ++col) {
        p.data[col * p.rows + row] = r.real(vals[static_cast<std::size_t>(col)]);
      }
    }
  }
  auto end = r.next("end");
  if (end.size() != 1 || end[0] != "end") r.fail("expected 'end'");
  return model;
}

}  // namespace

const ModelConfig& model_config(const AnyModel& model) {
  return std::visit([](const auto& m) -> const ModelConfig& { return m.config; }, model);
}

void write_model(const AnyModel& model, std::ostream& out) {
  const ModelConfig& c = model_config(model);
  out << kMagic << ' ' << kVersion << '\n'
      << "arch " << arch_name(c.arch) << '\n'
      << "vocab " << c.vocab_size << '\n'
      << "shortlist " << c.shortlist << '\n'
      << "embed " << c.embed << '\n'
      << "hidden " << c.hidden << '\n'
      << "succ " << c.succ << '\n'
      << "future_hidden " << c.future_hidden << '\n';
  const ParamList params = std::visit([](const auto& m) { return params_of(m); }, model);
  out << "tensors " << params.size() << '\n';
  std::string line;
  for (const auto& p : params) {
    out << "tensor " << p.name << ' ' << p.rows << ' ' << p.cols << '\n';
    for (Index row = 0; row < p.rows; ++row) {
      line.clear();
      for (Index col = 0; col < p.cols; ++col) {
        if (col) line += ' ';
        line += hexfloat(p.data[col * p.rows + row]);
      }
      out << line << '\n';
    }
  }
  out << "end\n";
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_model(model, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model file", path.string());
  out << buf.str();
  if (!out) throw FormatError("error while writing model file", path.string());
}

AnyModel read_model(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  auto magic = r.next("header");
  if (magic.size() != 2 || magic[0] != kMagic) r.fail("not a surnn model file");
  if (r.integer(magic[1]) != kVersion) r.fail("unsupported model file version " + magic[1]);

  ModelConfig c;
  auto arch = r.next("arch");
  if (arch.size() != 2 || arch[0] != "arch") r.fail("expected 'arch <uni|bi|su>'");
  try {
    c.arch = parse_arch(arch[1]);
  } catch (const UsageError& e) {
    r.fail(e.what());
  }
  c.vocab_size = static_cast<std::size_t>(r.field("vocab"));
  c.shortlist = static_cast<std::size_t>(r.field("shortlist"));
  c.embed = static_cast<Index>(r.field("embed"));
  c.hidden = static_cast<Index>(r.field("hidden"));
  c.succ = static_cast<int>(r.field("succ"));
  c.future_hidden = static_cast<Index>(r.field("future_hidden"));
  try {
    c.validate();
  } catch (const UsageError& e) {
    r.fail(std::string("inconsistent header: ") + e.what());
  }
  switch (c.arch) {
    case Arch::kUni: return read_tensors<UniRnnlm>(r, c);
    case Arch::kBi: return read_tensors<BiRnnlm>(r, c);
    case Arch::kSu: return read_tensors<SuRnnlm>(r, c);
  }
  r.fail("unknown architecture");
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file", path.string());
  return read_model(in, path.string());
}

}  // namespace surnn
