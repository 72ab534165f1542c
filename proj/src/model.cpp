#include "lesslab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace lesslab {

namespace {

void validate_spec(const ModelSpec& s) {
  if (s.input_dim < 1) throw ConfigError("model: input_dim must be positive");
  if (s.num_classes < 2) throw ConfigError("model: need at least 2 classes");
  if (s.hidden_width < 1) throw ConfigError("model: hidden_width must be positive");
  if (s.hidden_layers < 0) throw ConfigError("model: hidden_layers must be nonnegative");
  if (s.proj_dim < 1) throw ConfigError("model: proj_dim must be positive");
  if (s.prototypes() < 2) throw ConfigError("model: need at least 2 prototypes");
  if (s.temp_proto <= 0.0) throw ConfigError("model: temp_proto must be positive");
}

ParamSet make_params(const ModelSpec& spec) {
  ParamSet p;
  int in = spec.input_dim;
  for (int l = 0; l < spec.hidden_layers; ++l) {
    p.mlp.push_back({Mat::Zero(in, spec.hidden_width), Mat::Zero(1, spec.hidden_width)});
    in = spec.hidden_width;
  }
  p.class_head = {Mat::Zero(in, spec.num_classes), Mat::Zero(1, spec.num_classes)};
  p.proj_head = {Mat::Zero(in, spec.proj_dim), Mat::Zero(1, spec.proj_dim)};
  p.prototypes = Mat::Zero(spec.prototypes(), spec.proj_dim);
  return p;
}

void renormalize_prototypes(Mat& protos) {
  for (Eigen::Index i = 0; i < protos.rows(); ++i) {
    const double n = std::max(protos.row(i).norm(), kEps);
    protos.row(i) /= n;
  }
}

}  // namespace

void ParamSet::set_zero() {
  for_each_param(*this, [](const std::string&, Mat& m) { m.setZero(); });
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  for_each_param_pair(*this, other,
                      [scale](Mat& a, const Mat& b) { a += scale * b; });
}

ModelState init_model(const ModelSpec& spec, Rng& rng) {
  validate_spec(spec);
  ModelState st;
  st.spec = spec;
  st.params = make_params(spec);
  for (auto& layer : st.params.mlp) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.w.rows()));
    layer.w = scale * rng.gaussian(static_cast<int>(layer.w.rows()),
                                   static_cast<int>(layer.w.cols()));
  }
  auto init_head = [&rng](Linear& head) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(head.w.rows()));
    head.w = scale * rng.gaussian(static_cast<int>(head.w.rows()),
                                  static_cast<int>(head.w.cols()));
  };
  init_head(st.params.class_head);
  init_head(st.params.proj_head);
  st.params.prototypes = rng.gaussian(spec.prototypes(), spec.proj_dim);
  renormalize_prototypes(st.params.prototypes);
  st.momentum = make_params(spec);
  return st;
}

ParamSet zero_grads(const ModelState& state) { return make_params(state.spec); }

ForwardOut forward(const ModelState& state, const Mat& x) {
  if (x.cols() != state.spec.input_dim)
    throw ShapeError("forward: input dim mismatch");
  require_finite(x, "forward input");

  ForwardOut fo;
  fo.input = x;
  Mat h = x;
  for (const auto& layer : state.params.mlp) {
    h = ((h * layer.w).rowwise() + layer.b.row(0)).array().tanh().matrix();
    fo.hidden.push_back(h);
  }
  fo.class_logits = (h * state.params.class_head.w).rowwise() +
                    state.params.class_head.b.row(0);
  fo.class_probs = softmax_rows(fo.class_logits);

  fo.proj_raw = (h * state.params.proj_head.w).rowwise() +
                state.params.proj_head.b.row(0);
  fo.proj_norm = fo.proj_raw.rowwise().norm().cwiseMax(kEps);
  fo.embedding = fo.proj_raw.array().colwise() / fo.proj_norm.array();
  fo.proto_sim = fo.embedding * state.params.prototypes.transpose();
  fo.proto_scores = fo.proto_sim / state.spec.temp_proto;
  fo.proto_probs = softmax_rows(fo.proto_scores);
  return fo;
}

void backward(const ModelState& state, const ForwardOut& fo,
              const Mat& d_class_logits, const Mat& d_proto_scores,
              ParamSet& grads) {
  const Eigen::Index batch = fo.input.rows();
  const Mat& h_last = fo.hidden.empty() ? fo.input : fo.hidden.back();
  Mat d_h = Mat::Zero(batch, h_last.cols());

  if (d_class_logits.size() > 0) {
    if (d_class_logits.rows() != batch ||
        d_class_logits.cols() != state.spec.num_classes)
      throw ShapeError("backward: d_class_logits shape mismatch");
    grads.class_head.w += h_last.transpose() * d_class_logits;
    grads.class_head.b += d_class_logits.colwise().sum();
    d_h += d_class_logits * state.params.class_head.w.transpose();
  }

  if (d_proto_scores.size() > 0) {
    if (d_proto_scores.rows() != batch ||
        d_proto_scores.cols() != state.spec.prototypes())
      throw ShapeError("backward: d_proto_scores shape mismatch");
    const Mat d_sim = d_proto_scores / state.spec.temp_proto;
    grads.prototypes += d_sim.transpose() * fo.embedding;
    const Mat d_z = d_sim * state.params.prototypes;
    // undo row normalization: dpraw = (dz - z (z . dz)) / norm
    Mat d_praw(batch, d_z.cols());
    for (Eigen::Index i = 0; i < batch; ++i) {
      const double dot = fo.embedding.row(i).dot(d_z.row(i));
      d_praw.row(i) =
          (d_z.row(i) - dot * fo.embedding.row(i)) / fo.proj_norm(i);
    }
    grads.proj_head.w += h_last.transpose() * d_praw;
    grads.proj_head.b += d_praw.colwise().sum();
    d_h += d_praw * state.params.proj_head.w.transpose();
  }

  for (int l = static_cast<int>(state.params.mlp.size()) - 1; l >= 0; --l) {
    const Mat& act = fo.hidden[static_cast<size_t>(l)];
    const Mat& below = l == 0 ? fo.input : fo.hidden[static_cast<size_t>(l) - 1];
    const Mat d_pre = d_h.cwiseProduct((1.0 - act.array().square()).matrix());
    grads.mlp[static_cast<size_t>(l)].w += below.transpose() * d_pre;
    grads.mlp[static_cast<size_t>(l)].b += d_pre.colwise().sum();
    d_h = d_pre * state.params.mlp[static_cast<size_t>(l)].w.transpose();
  }
}

int ConfidentPrediction::gated_count() const {
  int n = 0;
  for (int g : gate) n += g;
  return n;
}

ConfidentPrediction gate_rows(const Mat& class_probs, const Vec& thresholds) {
  if (thresholds.size() != class_probs.cols())
    throw ShapeError("gate_rows: thresholds length mismatch");
  const double chance = 1.0 / static_cast<double>(class_probs.cols());
  for (Eigen::Index c = 0; c < thresholds.size(); ++c)
    if (!(thresholds(c) > chance))
      throw ContractError("gate_rows: threshold must exceed chance level");
  ConfidentPrediction out;
  out.max_prob = Vec(class_probs.rows());
  for (Eigen::Index i = 0; i < class_probs.rows(); ++i) {
    const int j = argmax_row(class_probs.row(i));
    out.label.push_back(j);
    out.max_prob(i) = class_probs(i, j);
    out.gate.push_back(out.max_prob(i) >= thresholds(j) ? 1 : 0);
  }
  return out;
}

ConfidentPrediction predict_confident(const ModelState& state, const Mat& x,
                                      const Vec& thresholds) {
  return gate_rows(forward(state, x).class_probs, thresholds);
}

void sgd_step(ModelState& state, const ParamSet& grads, double lr) {
  if (lr < 0.0) throw ContractError("sgd_step: negative learning rate");
  std::vector<std::pair<std::string, const Mat*>> gs;
  for_each_param(grads, [&gs](const std::string& name, const Mat& m) {
    gs.emplace_back(name, &m);
  });
  std::vector<Mat*> ps, ms;
  for_each_param(state.params, [&ps](const std::string&, Mat& m) { ps.push_back(&m); });
  for_each_param(state.momentum, [&ms](const std::string&, Mat& m) { ms.push_back(&m); });
  if (gs.size() != ps.size()) throw ShapeError("sgd_step: gradient layout mismatch");

  for (size_t i = 0; i < gs.size(); ++i) {
    const Mat& g = *gs[i].second;
    Mat& p = *ps[i];
    Mat& v = *ms[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("sgd_step: gradient shape mismatch for " + gs[i].first);
    if (!g.allFinite())
      throw NumericError("non-finite gradient for " + gs[i].first);
    v = state.sgd.momentum * v + (g + state.sgd.weight_decay * p);
    p -= lr * v;
  }
  renormalize_prototypes(state.params.prototypes);
}

namespace {

constexpr char kMagic[8] = {'L', 'E', 'S', 'S', 'L', 'A', 'B', '1'};

void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Mat& m) {
  write_i64(out, static_cast<std::int64_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_i64(out, m.rows());
  write_i64(out, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
}

void read_tensor(std::istream& in, const std::string& want_name, Mat& m,
                 const std::string& path) {
  const auto len = read_i64(in);
  std::string name(static_cast<size_t>(len), '\0');
  in.read(name.data(), len);
  const auto rows = read_i64(in);
  const auto cols = read_i64(in);
  if (!in || name != want_name || rows != m.rows() || cols != m.cols())
    throw IoError("checkpoint layout mismatch at " + want_name + " in " + path);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_f64(in);
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  write_i64(out, state.spec.input_dim);
  write_i64(out, state.spec.num_classes);
  write_i64(out, state.spec.hidden_width);
  write_i64(out, state.spec.hidden_layers);
  write_i64(out, state.spec.proj_dim);
  write_i64(out, state.spec.num_prototypes);
  write_f64(out, state.spec.temp_proto);
  write_f64(out, state.sgd.lr);
  write_f64(out, state.sgd.momentum);
  write_f64(out, state.sgd.weight_decay);
  for_each_param(state.params, [&out](const std::string& name, const Mat& m) {
    write_tensor(out, name, m);
  });
  for_each_param(state.momentum, [&out](const std::string& name, const Mat& m) {
    write_tensor(out, "momentum." + name, m);
  });
  if (!out) throw IoError("write failed: " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("bad checkpoint magic in " + path);

  ModelSpec spec;
  spec.input_dim = static_cast<int>(read_i64(in));
  spec.num_classes = static_cast<int>(read_i64(in));
  spec.hidden_width = static_cast<int>(read_i64(in));
  spec.hidden_layers = static_cast<int>(read_i64(in));
  spec.proj_dim = static_cast<int>(read_i64(in));
  spec.num_prototypes = static_cast<int>(read_i64(in));
  spec.temp_proto = read_f64(in);
  SgdConfig sgd;
  sgd.lr = read_f64(in);
  sgd.momentum = read_f64(in);
  sgd.weight_decay = read_f64(in);
  if (!in) throw IoError("truncated checkpoint header in " + path);
  validate_spec(spec);

  ModelState st;
  st.spec = spec;
  st.sgd = sgd;
  st.params = make_params(spec);
  st.momentum = make_params(spec);
  for_each_param(st.params, [&in, &path](const std::string& name, Mat& m) {
    read_tensor(in, name, m, path);
  });
  for_each_param(st.momentum, [&in, &path](const std::string& name, Mat& m) {
    read_tensor(in, "momentum." + name, m, path);
  });
  if (!in) throw IoError("truncated checkpoint in " + path);
  return st;
}

}  // namespace lesslab
