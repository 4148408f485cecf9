#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "cinest/estimator.hpp"
#include "cinest/random.hpp"

namespace cinest {

struct DaeConfig {
  std::vector<std::size_t> hidden{256, 256};
  std::size_t steps = 2000;
  std::size_t batch = 256;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t onehot_max_domain = 64;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static DaeConfig from_json(const nlohmann::json& j);
};

// ceil(1.6 * dom^0.56), capped at 64.
std::size_t embedding_width(std::size_t domain_size);

// Parameter layout of a network: every tensor lives in one flat vector.
// Inputs are one-hot (dom + 1 wide, the last slot being the mask token) or
// an embedding table with one extra mask row; heads are stacked row-wise.
struct DaeShape {
  std::vector<std::size_t> domains;
  std::vector<std::size_t> embed_dim;     // 0 = one-hot
  std::vector<std::size_t> input_offset;
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> head_offset;
  std::size_t head_width = 0;

  std::vector<std::size_t> embed_param;   // per attribute, embedding tables only
  std::vector<std::size_t> weight_param;  // per trunk layer
  std::vector<std::size_t> bias_param;
  std::size_t head_weight_param = 0;
  std::size_t head_bias_param = 0;
  std::size_t param_count = 0;

  std::size_t attr_count() const { return domains.size(); }
  std::size_t layer_input(std::size_t l) const { return l == 0 ? input_width : hidden[l - 1]; }
  std::size_t last_hidden() const { return hidden.empty() ? input_width : hidden.back(); }
};

DaeShape make_dae_shape(const std::vector<std::size_t>& domains, const std::vector<std::size_t>& hidden,
                        std::size_t onehot_max_domain);

// Masked denoising autoencoder over categorical attributes. Inputs are
// batch x attrs codes, row-major, with kUnassigned marking masked slots.
template <class Scalar>
class DaeNet {
 public:
  DaeNet() = default;
  DaeNet(DaeShape shape, std::uint64_t init_seed);
  DaeNet(DaeShape shape, std::vector<Scalar> params);

  const DaeShape& shape() const { return shape_; }
  std::vector<Scalar>& params() { return params_; }
  const std::vector<Scalar>& params() const { return params_; }

  // Mean cross-entropy over the slots where masked[i] != 0, predicting
  // targets[i]. Writes d(loss)/d(params) into `grad` when non-null.
  double loss(const std::vector<std::int32_t>& inputs, const std::vector<std::int32_t>& targets,
              const std::vector<std::uint8_t>& masked, std::size_t batch, std::vector<Scalar>* grad) const;

  // Logits of one attribute's head, batch x dom, row-major.
  void head_logits(const std::vector<std::int32_t>& inputs, std::size_t batch, std::size_t attr,
                   std::vector<double>& out) const;

 private:
  DaeShape shape_;
  std::vector<Scalar> params_;
};

extern template class DaeNet<float>;
extern template class DaeNet<double>;

// Which attributes of one training row are masked: k ~ U{1..n}, then k
// distinct attributes chosen uniformly. Depends only on the generator.
void draw_mask(Rng& rng, std::size_t attrs, std::vector<std::uint8_t>& mask);

class DaeModel final : public DensityEstimator {
 public:
  DaeModel() = default;
  DaeModel(AttributeLayout layout, std::uint64_t join_size, DaeConfig config, DaeNet<float> net);

  const AttributeLayout& layout() const override { return layout_; }
  std::uint64_t join_size() const override { return join_size_; }
  // Softmax of the target head with probabilities floored at 1e-8.
  void conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const override;

  const DaeConfig& config() const { return config_; }
  const DaeNet<float>& net() const { return net_; }

 private:
  AttributeLayout layout_;
  std::uint64_t join_size_ = 0;
  DaeConfig config_;
  DaeNet<float> net_;
};

struct TrainReport {
  std::vector<double> losses;  // one per step
  double seconds = 0;
};

// SGD with momentum on masked cross-entropy. Throws TrainingError when the
// loss stops being finite.
DaeModel train_dae(const JoinSample& samples, const DaeConfig& config, TrainReport* report = nullptr);

// CINM1 file: magic, layout hash, length-prefixed JSON header
// (hyperparameters, layout, join size), then little-endian float32 weights.
void save_model(const DaeModel& model, const std::filesystem::path& path);
// Refuses files whose layout hash differs from `expected`.
DaeModel load_model(const std::filesystem::path& path, const AttributeLayout& expected);

}  // namespace cinest
