#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lesslab/numerics.hpp"

namespace lesslab {

// Synthetic class-structured data: isotropic Gaussian clusters around
// num_classes centers whose pairwise distance is at least `separation`.
struct BlobSpec {
  int num_classes = 5;
  int dim = 8;
  double separation = 4.0;
  double spread = 0.8;
  int per_class = 101;
};

// Owns the (randomly rotated) class centers. Training pools and held-out
// evaluation sets must be drawn from the same generator so that they share
// geometry; centers come from their own stream and are fixed at construction.
class BlobGenerator {
 public:
  BlobGenerator(const BlobSpec& spec, Rng center_rng);

  const BlobSpec& spec() const { return spec_; }
  const Mat& centers() const { return centers_; }

  // per_class fresh points per class, class-major order, labels attached.
  std::pair<Mat, std::vector<int>> sample(int per_class, Rng& rng) const;

  // Index of the closest center; the Bayes rule for this family.
  int nearest_center(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  struct DataPoolTag;  // see make_pool below
 private:
  BlobSpec spec_;
  Mat centers_;
};

// A dataset plus its supervision bookkeeping. Training code reads labels
// only through training_label(); oracle_labels exist for diagnostics and
// may never influence an update.
struct DataPool {
  Mat features;                    // M x dim
  std::vector<int> oracle_labels;  // ground truth, diagnostics only
  std::vector<int> labeled_ids;    // sorted
  std::vector<int> unlabeled_ids;  // sorted
  std::map<int, int> promoted;     // id -> pseudo-label fixed at promotion
  int num_classes = 0;
  Vec class_priors;                // empirical class fractions

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool is_labeled(int id) const;
  bool is_unlabeled(int id) const;
  // Label visible to training: true label for labeled ids, promotion label
  // for promoted ids; ContractError for anything else.
  int training_label(int id) const;
  int oracle_label(int id) const;
};

DataPool make_pool(const BlobGenerator& gen, Rng& rng);

// Convenience: centers from a derived stream, then points from rng.
DataPool generate_blobs(const BlobSpec& spec, Rng& rng);

// Keep labels_per_class labeled ids in each class, everything else becomes
// unlabeled. The barely-supervised regime is labels_per_class = 1.
DataPool split_barely(DataPool pool, int labels_per_class, Rng& rng);

// ----------------------------------------------------------- augmentation

enum class AugKind { weak, strong };

// Distribution over input transformations. Weak = additive Gaussian noise;
// strong additionally masks coordinates and jitters the scale.
struct AugmentationFamily {
  AugKind kind = AugKind::weak;
  double noise_sigma = 0.0;
  double mask_prob = 0.0;     // strong only
  double scale_jitter = 0.0;  // strong only
};

AugmentationFamily make_weak(double noise_sigma);
AugmentationFamily make_strong(double noise_sigma, double mask_prob, double scale_jitter);

// One concrete transformation drawn from a family. Applying the same op
// twice gives the same output, so ops can be enumerated and replayed.
struct AugOp {
  Vec noise;          // added first
  Vec mask;           // 0/1 per coordinate, applied second
  double scale = 1.0; // applied last
};

AugOp sample_op(const AugmentationFamily& family, int dim, Rng& rng);
Vec apply(const AugOp& op, const Eigen::Ref<const Vec>& x);

// ----------------------------------------------------------------- batch

// One optimization step worth of data: labeled rows under weak views plus
// unlabeled rows under paired weak/strong views of the same sample.
struct Batch {
  std::vector<int> labeled_ids;
  Mat labeled_x;             // weak views
  std::vector<int> labels;   // training labels for labeled rows
  std::vector<int> unlabeled_ids;
  Mat weak_x;                // weak view per unlabeled sample
  Mat strong_x;              // strong view of the same sample

  int labeled_count() const { return static_cast<int>(labeled_ids.size()); }
  int unlabeled_count() const { return static_cast<int>(unlabeled_ids.size()); }
};

// batch_size labeled draws and mu_ratio * batch_size unlabeled draws, both
// uniform with replacement. Promoted ids count as labeled (with their
// promotion label) and leave the unlabeled draw pool.
Batch sample_batch(const DataPool& pool, int batch_size, int mu_ratio,
                   const AugmentationFamily& weak, const AugmentationFamily& strong,
                   Rng& rng);

// ------------------------------------------------------------------- csv

// Dataset dump: header id,label,split,f0..f{d-1}; rows ordered by id;
// %.17g floats so load(save(pool)) reproduces features exactly.
void save_pool_csv(const DataPool& pool, const std::string& path);
DataPool load_pool_csv(const std::string& path);

}  // namespace lesslab
