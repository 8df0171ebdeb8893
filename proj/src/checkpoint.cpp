#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "msntucf/error.hpp"
#include "msntucf/model.hpp"

namespace msntucf {

namespace {

constexpr const char* kMagic = "msntucf-checkpoint 1";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    fail(ErrorKind::Data, "checkpoint: bad number '" + text + "' for " + what);
  }
  return v;
}

std::size_t parse_size(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size()) fail(ErrorKind::Data, "checkpoint: bad count '" + text + "' for " + what);
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_triple(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_size(part, what));
  if (out.size() != 3) fail(ErrorKind::Data, "checkpoint: expected three values for " + what);
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const NormalizationParams& norm) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write checkpoint " + path.string());
  const ModelConfig& c = model.config();
  const TensorShape& s = model.shape();
  out << kMagic << '\n'
      << "kind=" << to_string(model.kind()) << '\n'
      << "shape=" << s.users << ',' << s.services << ',' << s.time_slices << '\n'
      << "rank=" << c.rank_p << ',' << c.rank_q << ',' << c.rank_r << '\n'
      << "heads=" << c.heads << '\n'
      << "loops=" << c.loops << '\n'
      << "dropout=" << hex(c.dropout) << '\n'
      << "seed=" << c.seed << '\n'
      << "softmax_axis=" << to_string(c.softmax_axis) << '\n'
      << "dropout_before_softmax=" << c.dropout_before_softmax << '\n'
      << "share_loop_weights=" << c.share_loop_weights << '\n'
      << "chunked_heads=" << c.chunked_heads << '\n'
      << "layer_norm_eps=" << hex(c.layer_norm_eps) << '\n'
      << "norm_log=" << norm.log_applied << '\n'
      << "norm_z_min=" << hex(norm.z_min) << '\n'
      << "norm_z_max=" << hex(norm.z_max) << '\n';
  const auto params = model.parameters();
  out << "arrays=" << params.size() << '\n';
  for (const Parameter* p : params) {
    out << "array " << p->name << ' ' << p->value.rank();
    for (std::size_t d : p->value.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t n = 0; n < p->value.size(); ++n) {
      out << (n ? " " : "") << hex(p->value[n]);
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::Data, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    fail(ErrorKind::Data, path.string() + " is not a checkpoint file");
  }
  std::map<std::string, std::string> header;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Data, "checkpoint: malformed header line '" + line + "'");
    header[line.substr(0, eq)] = line.substr(eq + 1);
    if (line.starts_with("arrays=")) break;
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end()) fail(ErrorKind::Data, "checkpoint: missing key '" + key + "'");
    return it->second;
  };

  const ModelKind kind = parse_model_kind(get("kind"));
  const auto shape_v = parse_triple(get("shape"), "shape");
  const TensorShape shape{shape_v[0], shape_v[1], shape_v[2]};
  const auto rank_v = parse_triple(get("rank"), "rank");
  ModelConfig c;
  c.rank_p = rank_v[0];
  c.rank_q = rank_v[1];
  c.rank_r = rank_v[2];
  c.heads = parse_size(get("heads"), "heads");
  c.loops = parse_size(get("loops"), "loops");
  c.dropout = parse_double(get("dropout"), "dropout");
  c.seed = parse_size(get("seed"), "seed");
  c.softmax_axis = parse_softmax_axis(get("softmax_axis"));
  c.dropout_before_softmax = parse_size(get("dropout_before_softmax"), "dropout_before_softmax") != 0;
  c.share_loop_weights = parse_size(get("share_loop_weights"), "share_loop_weights") != 0;
  c.chunked_heads = parse_size(get("chunked_heads"), "chunked_heads") != 0;
  c.layer_norm_eps = parse_double(get("layer_norm_eps"), "layer_norm_eps");

  Checkpoint ck;
  ck.norm.log_applied = parse_size(get("norm_log"), "norm_log") != 0;
  ck.norm.z_min = parse_double(get("norm_z_min"), "norm_z_min");
  ck.norm.z_max = parse_double(get("norm_z_max"), "norm_z_max");
  ck.model = make_model(kind, c, shape);

  const std::size_t n_arrays = parse_size(get("arrays"), "arrays");
  auto params = ck.model->parameters();
  if (n_arrays != params.size()) {
    fail(ErrorKind::Data, "checkpoint: holds " + std::to_string(n_arrays) + " arrays, model expects " +
                              std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    std::string tag, name;
    std::size_t rank = 0;
    in >> tag >> name >> rank;
    if (!in || tag != "array" || name != p->name) {
      fail(ErrorKind::Data, "checkpoint: expected array '" + p->name + "'");
    }
    Shape shape_read(rank);
    for (auto& d : shape_read) in >> d;
    if (shape_read != p->value.shape()) {
      fail(ErrorKind::Data, "checkpoint: array '" + name + "' has shape " + shape_string(shape_read) +
                                ", expected " + shape_string(p->value.shape()));
    }
    std::string token;
    for (double& v : p->value.data()) {
      in >> token;
      v = parse_double(token, name);
    }
    if (!in) fail(ErrorKind::Data, "checkpoint: truncated array '" + name + "'");
  }
  return ck;
}

}  // namespace msntucf
