#include "debias/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "debias/data.hpp"
#include "debias/errors.hpp"

namespace debias {

namespace {

constexpr const char* kMagic = "debias-checkpoint v1";

void write_tensor(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
  out << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out << (c ? " " : "") << format_double(values[r * cols + c]);
    }
    out << '\n';
  }
}

void write_layer(std::ostream& out, const std::string& prefix, const DenseLayer& layer) {
  write_tensor(out, prefix + ".weight", layer.outputs(), layer.inputs(), layer.weight.values());
  write_tensor(out, prefix + ".bias", 1, layer.bias.size(), layer.bias);
}

class Reader {
 public:
  explicit Reader(const std::string& text) : in_(text) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint line " + std::to_string(line_) + ": " + what);
  }

  void read_tensor(const std::string& name, std::size_t rows, std::size_t cols,
                   std::span<double> dst) {
    std::istringstream head(line());
    std::string word, got;
    std::size_t r = 0, c = 0;
    if (!(head >> word >> got >> r >> c) || word != "tensor") fail("expected tensor header");
    if (got != name) fail("expected tensor '" + name + "', found '" + got + "'");
    if (r != rows || c != cols) fail("tensor '" + name + "' has the wrong shape");
    for (std::size_t i = 0; i < rows; ++i) {
      std::istringstream row(line());
      for (std::size_t j = 0; j < cols; ++j) {
        std::string tok;
        if (!(row >> tok)) fail("too few values in tensor '" + name + "'");
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
          fail("bad number '" + tok + "'");
        }
        dst[i * cols + j] = v;
      }
      std::string extra;
      if (row >> extra) fail("too many values in tensor '" + name + "'");
    }
  }

  void read_layer(const std::string& prefix, DenseLayer& layer) {
    read_tensor(prefix + ".weight", layer.outputs(), layer.inputs(), layer.weight.values());
    read_tensor(prefix + ".bias", 1, layer.bias.size(), layer.bias);
  }

 private:
  std::istringstream in_;
  std::size_t line_ = 0;
};

}  // namespace

std::string checkpoint_text(const Checkpoint& ckpt) {
  const MlpShape s = ckpt.params.shape();
  std::ostringstream out;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ckpt.config_hash));
  out << kMagic << '\n'
      << "config_hash " << hash << '\n'
      << "shape " << s.input_dim << ' ' << s.hidden_width << ' ' << s.depth << ' '
      << s.num_classes << ' ' << s.detector_outputs << '\n';
  for (std::size_t i = 0; i < ckpt.params.encoder.size(); ++i) {
    write_layer(out, "encoder." + std::to_string(i), ckpt.params.encoder[i]);
  }
  write_layer(out, "main", ckpt.params.main_head);
  write_layer(out, "detector", ckpt.params.detector_head);
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(const std::string& text) {
  Reader in(text);
  if (in.line() != kMagic) in.fail("not a debias checkpoint (bad magic line)");

  Checkpoint ckpt;
  {
    std::istringstream s(in.line());
    std::string word, hex;
    if (!(s >> word >> hex) || word != "config_hash" || hex.size() != 16) {
      in.fail("expected config_hash");
    }
    const auto r = std::from_chars(hex.data(), hex.data() + hex.size(), ckpt.config_hash, 16);
    if (r.ec != std::errc() || r.ptr != hex.data() + hex.size()) in.fail("bad config_hash");
  }
  MlpShape shape;
  {
    std::istringstream s(in.line());
    std::string word;
    if (!(s >> word >> shape.input_dim >> shape.hidden_width >> shape.depth >>
          shape.num_classes >> shape.detector_outputs) ||
        word != "shape") {
      in.fail("expected shape");
    }
    try {
      shape.validate();
    } catch (const ConfigError& e) {
      in.fail(e.what());
    }
  }
  ckpt.params = zero_params(shape);
  for (std::size_t i = 0; i < ckpt.params.encoder.size(); ++i) {
    in.read_layer("encoder." + std::to_string(i), ckpt.params.encoder[i]);
  }
  in.read_layer("main", ckpt.params.main_head);
  in.read_layer("detector", ckpt.params.detector_head);
  if (in.line() != "end") in.fail("expected end");
  try {
    ckpt.params.validate();
  } catch (const ConfigError& e) {
    in.fail(e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_text(ckpt);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace debias
