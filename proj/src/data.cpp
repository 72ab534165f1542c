#include "lesslab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lesslab {

namespace {

void validate_spec(const BlobSpec& s) {
  if (s.num_classes < 2) throw ConfigError("blobs: need at least 2 classes");
  if (s.dim < 1) throw ConfigError("blobs: dim must be positive");
  if (s.separation <= 0.0) throw ConfigError("blobs: separation must be positive");
  if (s.spread < 0.0) throw ConfigError("blobs: spread must be nonnegative");
  if (s.per_class < 1) throw ConfigError("blobs: per_class must be positive");
}

// Random rotation: QR of a Gaussian matrix with the usual sign fix.
Mat random_rotation(int dim, Rng& rng) {
  const Mat g = rng.gaussian(dim, dim);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

}  // namespace

BlobGenerator::BlobGenerator(const BlobSpec& spec, Rng center_rng) : spec_(spec) {
  validate_spec(spec);
  const int k = spec.num_classes;
  const int d = spec.dim;
  Mat c = Mat::Zero(k, d);
  if (d >= k) {
    // scaled simplex corners: every pair is exactly `separation` apart, and
    // no single coordinate carries a whole class (masking stays benign)
    const double r = spec.separation / std::numbers::sqrt2;
    for (int i = 0; i < k; ++i) c(i, i) = r;
  } else if (d >= 2) {
    // ring in the first two coordinates; adjacent gap = separation
    const double r = spec.separation / (2.0 * std::sin(std::numbers::pi / k));
    for (int i = 0; i < k; ++i) {
      const double a = 2.0 * std::numbers::pi * i / k;
      c(i, 0) = r * std::cos(a);
      c(i, 1) = r * std::sin(a);
    }
  } else {
    for (int i = 0; i < k; ++i) c(i, 0) = i * spec.separation;
  }
  if (d >= 2) c *= random_rotation(d, center_rng).transpose();
  centers_ = std::move(c);
}

std::pair<Mat, std::vector<int>> BlobGenerator::sample(int per_class, Rng& rng) const {
  if (per_class < 1) throw ConfigError("sample: per_class must be positive");
  const int k = spec_.num_classes;
  const int d = spec_.dim;
  Mat x(k * per_class, d);
  std::vector<int> y(static_cast<size_t>(k) * per_class);
  int row = 0;
  for (int c = 0; c < k; ++c) {
    for (int p = 0; p < per_class; ++p, ++row) {
      for (int j = 0; j < d; ++j)
        x(row, j) = centers_(c, j) + spec_.spread * rng.normal();
      y[row] = c;
    }
  }
  return {std::move(x), std::move(y)};
}

int BlobGenerator::nearest_center(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != centers_.cols()) throw ShapeError("nearest_center: dim mismatch");
  int best = 0;
  double best_d = (x - centers_.row(0)).squaredNorm();
  for (int c = 1; c < centers_.rows(); ++c) {
    const double dc = (x - centers_.row(c)).squaredNorm();
    if (dc < best_d) {
      best_d = dc;
      best = c;
    }
  }
  return best;
}

bool DataPool::is_labeled(int id) const {
  return std::binary_search(labeled_ids.begin(), labeled_ids.end(), id);
}

bool DataPool::is_unlabeled(int id) const {
  return std::binary_search(unlabeled_ids.begin(), unlabeled_ids.end(), id);
}

int DataPool::training_label(int id) const {
  if (id < 0 || id >= size()) throw ContractError("training_label: id out of range");
  if (is_labeled(id)) return oracle_labels[static_cast<size_t>(id)];
  if (auto it = promoted.find(id); it != promoted.end()) return it->second;
  throw ContractError("training_label: id " + std::to_string(id) +
                      " has no training label");
}

int DataPool::oracle_label(int id) const {
  if (id < 0 || id >= size()) throw ContractError("oracle_label: id out of range");
  return oracle_labels[static_cast<size_t>(id)];
}

DataPool make_pool(const BlobGenerator& gen, Rng& rng) {
  DataPool pool;
  auto [x, y] = gen.sample(gen.spec().per_class, rng);
  pool.features = std::move(x);
  pool.oracle_labels = std::move(y);
  pool.num_classes = gen.spec().num_classes;
  pool.unlabeled_ids.resize(pool.oracle_labels.size());
  for (int i = 0; i < pool.size(); ++i) pool.unlabeled_ids[static_cast<size_t>(i)] = i;
  pool.class_priors = Vec::Zero(pool.num_classes);
  for (int label : pool.oracle_labels) pool.class_priors(label) += 1.0;
  pool.class_priors /= static_cast<double>(pool.size());
  return pool;
}

DataPool generate_blobs(const BlobSpec& spec, Rng& rng) {
  BlobGenerator gen(spec, rng.split("centers"));
  return make_pool(gen, rng);
}

DataPool split_barely(DataPool pool, int labels_per_class, Rng& rng) {
  if (labels_per_class < 1) throw ConfigError("split: labels_per_class must be positive");
  std::vector<std::vector<int>> by_class(static_cast<size_t>(pool.num_classes));
  for (int i = 0; i < pool.size(); ++i)
    by_class[static_cast<size_t>(pool.oracle_labels[static_cast<size_t>(i)])].push_back(i);

  pool.labeled_ids.clear();
  for (auto& ids : by_class) {
    if (static_cast<int>(ids.size()) < labels_per_class)
      throw ConfigError("split: a class has fewer than labels_per_class samples");
    // partial Fisher-Yates: first labels_per_class entries become the draw
    for (int t = 0; t < labels_per_class; ++t) {
      const int j = t + rng.uniform_int(static_cast<int>(ids.size()) - t);
      std::swap(ids[static_cast<size_t>(t)], ids[static_cast<size_t>(j)]);
    }
    pool.labeled_ids.insert(pool.labeled_ids.end(), ids.begin(),
                            ids.begin() + labels_per_class);
  }
  std::sort(pool.labeled_ids.begin(), pool.labeled_ids.end());

  pool.unlabeled_ids.clear();
  for (int i = 0; i < pool.size(); ++i)
    if (!std::binary_search(pool.labeled_ids.begin(), pool.labeled_ids.end(), i))
      pool.unlabeled_ids.push_back(i);
  pool.promoted.clear();
  return pool;
}

AugmentationFamily make_weak(double noise_sigma) {
  if (noise_sigma < 0.0) throw ConfigError("weak family: noise_sigma must be nonnegative");
  return {AugKind::weak, noise_sigma, 0.0, 0.0};
}

AugmentationFamily make_strong(double noise_sigma, double mask_prob, double scale_jitter) {
  if (noise_sigma < 0.0) throw ConfigError("strong family: noise_sigma must be nonnegative");
  if (mask_prob < 0.0 || mask_prob > 1.0)
    throw ConfigError("strong family: mask_prob must lie in [0, 1]");
  if (scale_jitter < 0.0 || scale_jitter >= 1.0)
    throw ConfigError("strong family: scale_jitter must lie in [0, 1)");
  return {AugKind::strong, noise_sigma, mask_prob, scale_jitter};
}

AugOp sample_op(const AugmentationFamily& family, int dim, Rng& rng) {
  if (dim < 1) throw ContractError("sample_op: dim must be positive");
  AugOp op;
  op.noise = Vec(dim);
  for (int j = 0; j < dim; ++j) op.noise(j) = family.noise_sigma * rng.normal();
  op.mask = Vec::Ones(dim);
  op.scale = 1.0;
  if (family.kind == AugKind::strong) {
    for (int j = 0; j < dim; ++j)
      op.mask(j) = rng.uniform01() < family.mask_prob ? 0.0 : 1.0;
    op.scale = 1.0 + rng.uniform(-family.scale_jitter, family.scale_jitter);
  }
  return op;
}

Vec apply(const AugOp& op, const Eigen::Ref<const Vec>& x) {
  if (x.size() != op.noise.size() || x.size() != op.mask.size())
    throw ShapeError("apply: op and input dims differ");
  return ((x + op.noise).cwiseProduct(op.mask)) * op.scale;
}

Batch sample_batch(const DataPool& pool, int batch_size, int mu_ratio,
                   const AugmentationFamily& weak, const AugmentationFamily& strong,
                   Rng& rng) {
  if (batch_size < 1) throw ConfigError("sample_batch: batch_size must be positive");
  if (mu_ratio < 0) throw ConfigError("sample_batch: mu_ratio must be nonnegative");
  if (weak.kind != AugKind::weak || strong.kind != AugKind::strong)
    throw ContractError("sample_batch: family kinds are swapped");

  std::vector<int> labeled_pool = pool.labeled_ids;
  for (const auto& [id, label] : pool.promoted) labeled_pool.push_back(id);
  if (labeled_pool.empty()) throw ConfigError("sample_batch: no labeled samples");

  std::vector<int> unlabeled_pool;
  unlabeled_pool.reserve(pool.unlabeled_ids.size());
  for (int id : pool.unlabeled_ids)
    if (!pool.promoted.count(id)) unlabeled_pool.push_back(id);

  const int d = pool.dim();
  Batch batch;
  batch.labeled_x = Mat(batch_size, d);
  for (int i = 0; i < batch_size; ++i) {
    const int id = labeled_pool[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(labeled_pool.size())))];
    const AugOp op = sample_op(weak, d, rng);
    batch.labeled_x.row(i) = apply(op, pool.features.row(id).transpose()).transpose();
    batch.labeled_ids.push_back(id);
    batch.labels.push_back(pool.training_label(id));
  }

  // promotion can drain the unlabeled pool entirely; then the batch is
  // supervised-only rather than an error
  const int want_u = unlabeled_pool.empty() ? 0 : mu_ratio * batch_size;
  batch.weak_x = Mat(want_u, d);
  batch.strong_x = Mat(want_u, d);
  for (int i = 0; i < want_u; ++i) {
    const int id = unlabeled_pool[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(unlabeled_pool.size())))];
    const AugOp w = sample_op(weak, d, rng);
    const AugOp s = sample_op(strong, d, rng);
    batch.weak_x.row(i) = apply(w, pool.features.row(id).transpose()).transpose();
    batch.strong_x.row(i) = apply(s, pool.features.row(id).transpose()).transpose();
    batch.unlabeled_ids.push_back(id);
  }
  return batch;
}

void save_pool_csv(const DataPool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "id,label,split";
  for (int j = 0; j < pool.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[40];
  for (int i = 0; i < pool.size(); ++i) {
    out << i << ',' << pool.oracle_labels[static_cast<size_t>(i)] << ','
        << (pool.is_labeled(i) ? "labeled" : "unlabeled");
    for (int j = 0; j < pool.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", pool.features(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

DataPool load_pool_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 4 || header[0] != "id" || header[1] != "label" ||
      header[2] != "split")
    throw IoError("bad dataset header in " + path);
  const int d = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < d; ++j)
    if (header[static_cast<size_t>(j) + 3] != "f" + std::to_string(j))
      throw IoError("bad feature column name in " + path);

  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  std::vector<int> labeled_ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cells;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (static_cast<int>(cells.size()) != 3 + d)
      throw IoError("bad column count in " + path);
    try {
      const int id = std::stoi(cells[0]);
      if (id != static_cast<int>(feats.size()))
        throw IoError("rows out of id order in " + path);
      labels.push_back(std::stoi(cells[1]));
      if (cells[2] == "labeled")
        labeled_ids.push_back(id);
      else if (cells[2] != "unlabeled")
        throw IoError("bad split value in " + path);
      std::vector<double> row(static_cast<size_t>(d));
      for (int j = 0; j < d; ++j) row[static_cast<size_t>(j)] = std::stod(cells[static_cast<size_t>(j) + 3]);
      feats.push_back(std::move(row));
    } catch (const std::invalid_argument&) {
      throw IoError("unparseable cell in " + path);
    } catch (const std::out_of_range&) {
      throw IoError("out-of-range cell in " + path);
    }
  }
  if (feats.empty()) throw IoError("dataset has no rows: " + path);

  DataPool pool;
  pool.features = Mat(static_cast<Eigen::Index>(feats.size()), d);
  for (size_t i = 0; i < feats.size(); ++i)
    for (int j = 0; j < d; ++j) pool.features(static_cast<Eigen::Index>(i), j) = feats[i][static_cast<size_t>(j)];
  pool.oracle_labels = std::move(labels);
  int k = 0;
  for (int label : pool.oracle_labels) {
    if (label < 0) throw IoError("negative label in " + path);
    k = std::max(k, label + 1);
  }
  pool.num_classes = k;
  pool.labeled_ids = std::move(labeled_ids);
  for (int i = 0; i < pool.size(); ++i)
    if (!std::binary_search(pool.labeled_ids.begin(), pool.labeled_ids.end(), i))
      pool.unlabeled_ids.push_back(i);
  pool.class_priors = Vec::Zero(k);
  for (int label : pool.oracle_labels) pool.class_priors(label) += 1.0;
  pool.class_priors /= static_cast<double>(pool.size());
  return pool;
}

}  // namespace lesslab
