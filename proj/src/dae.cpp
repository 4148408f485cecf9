#include "cinest/dae.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "cinest/error.hpp"

namespace cinest {

nlohmann::json DaeConfig::to_json() const {
  return {{"hidden", hidden},
          {"steps", steps},
          {"batch", batch},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"onehot_max_domain", onehot_max_domain},
          {"seed", seed}};
}

DaeConfig DaeConfig::from_json(const nlohmann::json& j) {
  DaeConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.onehot_max_domain = j.value("onehot_max_domain", c.onehot_max_domain);
  c.seed = j.value("seed", c.seed);
  if (c.batch == 0) throw ModelError("dae batch must be positive");
  if (!(c.learning_rate > 0)) throw ModelError("dae learning_rate must be positive");
  if (c.momentum < 0 || c.momentum >= 1) throw ModelError("dae momentum must be in [0, 1)");
  for (auto h : c.hidden)
    if (h == 0) throw ModelError("dae hidden sizes must be positive");
  return c;
}

std::size_t embedding_width(std::size_t domain_size) {
  const double w = std::ceil(1.6 * std::pow(static_cast<double>(domain_size), 0.56));
  return std::min<std::size_t>(64, static_cast<std::size_t>(w));
}

DaeShape make_dae_shape(const std::vector<std::size_t>& domains, const std::vector<std::size_t>& hidden,
                        std::size_t onehot_max_domain) {
  DaeShape s;
  s.domains = domains;
  s.hidden = hidden;
  std::size_t p = 0;
  for (std::size_t dom : domains) {
    const std::size_t d = dom <= onehot_max_domain ? 0 : embedding_width(dom);
    s.embed_dim.push_back(d);
    s.input_offset.push_back(s.input_width);
    s.input_width += d == 0 ? dom + 1 : d;
    s.embed_param.push_back(p);
    if (d != 0) p += d * (dom + 1);
  }
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    s.weight_param.push_back(p);
    p += hidden[l] * s.layer_input(l);
    s.bias_param.push_back(p);
    p += hidden[l];
  }
  for (std::size_t dom : domains) {
    s.head_offset.push_back(s.head_width);
    s.head_width += dom;
  }
  s.head_weight_param = p;
  p += s.head_width * s.last_hidden();
  s.head_bias_param = p;
  p += s.head_width;
  s.param_count = p;
  return s;
}

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
Eigen::Map<const Mat<S>> cmap(const std::vector<S>& p, std::size_t off, std::size_t rows, std::size_t cols) {
  return {p.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <class S>
Eigen::Map<Mat<S>> wmap(std::vector<S>& p, std::size_t off, std::size_t rows, std::size_t cols) {
  return {p.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

// Activations of one forward pass, kept for backpropagation.
template <class S>
struct Trace {
  Mat<S> x;                 // input_width x batch
  std::vector<Mat<S>> h;    // post-ReLU per hidden layer
};

template <class S>
void forward_trunk(const DaeShape& sh, const std::vector<S>& params, const std::vector<std::int32_t>& inputs,
                   std::size_t batch, Trace<S>& t) {
  const std::size_t A = sh.attr_count();
  if (inputs.size() != batch * A) throw ModelError("input batch has the wrong width");
  t.x = Mat<S>::Zero(static_cast<Eigen::Index>(sh.input_width), static_cast<Eigen::Index>(batch));
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t a = 0; a < A; ++a) {
      const std::int32_t v = inputs[r * A + a];
      if (v >= static_cast<std::int32_t>(sh.domains[a])) throw ModelError("input code outside attribute domain");
      const std::size_t idx = v < 0 ? sh.domains[a] : static_cast<std::size_t>(v);
      const auto col = static_cast<Eigen::Index>(r);
      if (sh.embed_dim[a] == 0) {
        t.x(static_cast<Eigen::Index>(sh.input_offset[a] + idx), col) = S(1);
      } else {
        const std::size_t d = sh.embed_dim[a];
        auto table = cmap(params, sh.embed_param[a], d, sh.domains[a] + 1);
        t.x.block(static_cast<Eigen::Index>(sh.input_offset[a]), col, static_cast<Eigen::Index>(d), 1) =
            table.col(static_cast<Eigen::Index>(idx));
      }
    }
  t.h.resize(sh.hidden.size());
  const Mat<S>* prev = &t.x;
  for (std::size_t l = 0; l < sh.hidden.size(); ++l) {
    auto W = cmap(params, sh.weight_param[l], sh.hidden[l], sh.layer_input(l));
    auto b = cmap(params, sh.bias_param[l], sh.hidden[l], 1);
    t.h[l] = (W * *prev).colwise() + b.col(0);
    t.h[l] = t.h[l].cwiseMax(S(0));
    prev = &t.h[l];
  }
}

template <class S>
const Mat<S>& last_activation(const Trace<S>& t) {
  return t.h.empty() ? t.x : t.h.back();
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw LoadError(what + ": model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& what) {
  const std::uint64_t lo = read_u32(in, what);
  return lo | (static_cast<std::uint64_t>(read_u32(in, what)) << 32);
}

constexpr char kModelMagic[5] = {'C', 'I', 'N', 'M', '1'};

}  // namespace

template <class Scalar>
DaeNet<Scalar>::DaeNet(DaeShape shape, std::uint64_t init_seed) : shape_(std::move(shape)), params_(shape_.param_count, Scalar(0)) {
  Rng rng(mix_seed(init_seed));
  auto fill = [&](std::size_t off, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = static_cast<Scalar>((2 * uniform01(rng) - 1) * bound);
  };
  for (std::size_t a = 0; a < shape_.attr_count(); ++a)
    if (shape_.embed_dim[a] != 0) fill(shape_.embed_param[a], shape_.embed_dim[a] * (shape_.domains[a] + 1), 1.0);
  for (std::size_t l = 0; l < shape_.hidden.size(); ++l) {
    const std::size_t fan_in = shape_.layer_input(l);
    fill(shape_.weight_param[l], shape_.hidden[l] * fan_in, std::sqrt(6.0 / static_cast<double>(fan_in)));
  }
  fill(shape_.head_weight_param, shape_.head_width * shape_.last_hidden(),
       std::sqrt(3.0 / static_cast<double>(shape_.last_hidden())));
}

template <class Scalar>
DaeNet<Scalar>::DaeNet(DaeShape shape, std::vector<Scalar> params) : shape_(std::move(shape)), params_(std::move(params)) {
  if (params_.size() != shape_.param_count) throw ModelError("parameter count does not match network shape");
}

template <class Scalar>
double DaeNet<Scalar>::loss(const std::vector<std::int32_t>& inputs, const std::vector<std::int32_t>& targets,
                            const std::vector<std::uint8_t>& masked, std::size_t batch, std::vector<Scalar>* grad) const {
  using S = Scalar;
  const DaeShape& sh = shape_;
  const std::size_t A = sh.attr_count();
  Trace<S> t;
  forward_trunk(sh, params_, inputs, batch, t);
  const Mat<S>& top = last_activation(t);
  auto HW = cmap(params_, sh.head_weight_param, sh.head_width, sh.last_hidden());
  auto hb = cmap(params_, sh.head_bias_param, sh.head_width, 1);
  Mat<S> y = (HW * top).colwise() + hb.col(0);

  std::size_t m = 0;
  for (std::size_t i = 0; i < batch * A; ++i) m += masked[i] != 0;
  if (grad) grad->assign(params_.size(), S(0));
  if (m == 0) return 0.0;

  Mat<S> dy = Mat<S>::Zero(y.rows(), y.cols());
  double total = 0;
  const S inv_m = S(1) / static_cast<S>(m);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t a = 0; a < A; ++a) {
      if (!masked[r * A + a]) continue;
      const auto off = static_cast<Eigen::Index>(sh.head_offset[a]);
      const auto dom = static_cast<Eigen::Index>(sh.domains[a]);
      const auto col = static_cast<Eigen::Index>(r);
      auto logits = y.block(off, col, dom, 1);
      const S mx = logits.maxCoeff();
      Vec<S> e = (logits.array() - mx).exp().matrix();
      const S z = e.sum();
      const auto target = static_cast<Eigen::Index>(targets[r * A + a]);
      total += static_cast<double>(mx + std::log(z) - logits(target, 0));
      if (grad) {
        auto d = dy.block(off, col, dom, 1);
        d = e * (inv_m / z);
        d(target, 0) -= inv_m;
      }
    }
  const double loss_value = total / static_cast<double>(m);
  if (!grad) return loss_value;

  std::vector<S>& g = *grad;
  wmap(g, sh.head_weight_param, sh.head_width, sh.last_hidden()).noalias() = dy * top.transpose();
  wmap(g, sh.head_bias_param, sh.head_width, 1).noalias() = dy.rowwise().sum();
  Mat<S> dh = HW.transpose() * dy;
  for (std::size_t l = sh.hidden.size(); l-- > 0;) {
    Mat<S> dz = (t.h[l].array() > S(0)).select(dh, S(0));
    const Mat<S>& below = l == 0 ? t.x : t.h[l - 1];
    wmap(g, sh.weight_param[l], sh.hidden[l], sh.layer_input(l)).noalias() = dz * below.transpose();
    wmap(g, sh.bias_param[l], sh.hidden[l], 1).noalias() = dz.rowwise().sum();
    auto W = cmap(params_, sh.weight_param[l], sh.hidden[l], sh.layer_input(l));
    dh = W.transpose() * dz;
  }
  // dh now holds d(loss)/d(input); route embedding slices to their tables.
  for (std::size_t a = 0; a < A; ++a) {
    const std::size_t d = sh.embed_dim[a];
    if (d == 0) continue;
    auto table = wmap(g, sh.embed_param[a], d, sh.domains[a] + 1);
    for (std::size_t r = 0; r < batch; ++r) {
      const std::int32_t v = inputs[r * A + a];
      const std::size_t idx = v < 0 ? sh.domains[a] : static_cast<std::size_t>(v);
      table.col(static_cast<Eigen::Index>(idx)) +=
          dh.block(static_cast<Eigen::Index>(sh.input_offset[a]), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d), 1);
    }
  }
  return loss_value;
}

template <class Scalar>
void DaeNet<Scalar>::head_logits(const std::vector<std::int32_t>& inputs, std::size_t batch, std::size_t attr,
                                 std::vector<double>& out) const {
  using S = Scalar;
  const DaeShape& sh = shape_;
  if (attr >= sh.attr_count()) throw ModelError("unknown attribute " + std::to_string(attr));
  Trace<S> t;
  forward_trunk(sh, params_, inputs, batch, t);
  const std::size_t dom = sh.domains[attr];
  auto HW = cmap(params_, sh.head_weight_param, sh.head_width, sh.last_hidden());
  auto hb = cmap(params_, sh.head_bias_param, sh.head_width, 1);
  const auto off = static_cast<Eigen::Index>(sh.head_offset[attr]);
  const auto d = static_cast<Eigen::Index>(dom);
  Mat<S> y = (HW.middleRows(off, d) * last_activation(t)).colwise() + hb.col(0).segment(off, d);
  out.resize(batch * dom);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t v = 0; v < dom; ++v)
      out[r * dom + v] = static_cast<double>(y(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(r)));
}

template class DaeNet<float>;
template class DaeNet<double>;

void draw_mask(Rng& rng, std::size_t attrs, std::vector<std::uint8_t>& mask) {
  mask.assign(attrs, 0);
  if (attrs == 0) return;
  const std::size_t k = 1 + uniform_index(rng, attrs);
  std::vector<std::size_t> order(attrs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, attrs - i);
    std::swap(order[i], order[j]);
    mask[order[i]] = 1;
  }
}

DaeModel::DaeModel(AttributeLayout layout, std::uint64_t join_size, DaeConfig config, DaeNet<float> net)
    : layout_(std::move(layout)), join_size_(join_size), config_(std::move(config)), net_(std::move(net)) {}

void DaeModel::conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const {
  const std::size_t A = layout_.size();
  if (inputs.width() != A) throw EstimationError("assignment width does not match the model layout");
  if (target >= A) throw EstimationError("unknown target attribute position " + std::to_string(target));
  const std::size_t dom = layout_.domain_size(target);
  out.resize(inputs.rows() * dom);
  constexpr std::size_t kChunk = 2048;
  std::vector<std::int32_t> chunk;
  std::vector<double> logits;
  for (std::size_t begin = 0; begin < inputs.rows(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, inputs.rows() - begin);
    chunk.assign(inputs.row_data(begin), inputs.row_data(begin) + n * A);
    for (std::size_t r = 0; r < n; ++r) chunk[r * A + target] = kUnassigned;
    net_.head_logits(chunk, n, target, logits);
    for (std::size_t r = 0; r < n; ++r) {
      const double* l = logits.data() + r * dom;
      double* o = out.data() + (begin + r) * dom;
      const double mx = *std::max_element(l, l + dom);
      double z = 0;
      for (std::size_t v = 0; v < dom; ++v) z += (o[v] = std::exp(l[v] - mx));
      double z2 = 0;
      for (std::size_t v = 0; v < dom; ++v) z2 += (o[v] = std::max(o[v] / z, 1e-8));
      for (std::size_t v = 0; v < dom; ++v) o[v] /= z2;
    }
  }
}

DaeModel train_dae(const JoinSample& samples, const DaeConfig& config, TrainReport* report) {
  if (samples.sample_count == 0) throw TrainingError("no training samples");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t A = samples.layout.size();
  DaeShape shape = make_dae_shape(samples.layout.domain_sizes(), config.hidden, config.onehot_max_domain);
  DaeNet<float> net(shape, derive_seed(config.seed, "init"));
  std::vector<float> velocity(shape.param_count, 0.0f), grad;
  Rng rng(derive_seed(config.seed, "batches"));

  const std::size_t B = config.batch;
  std::vector<std::int32_t> inputs(B * A), targets(B * A);
  std::vector<std::uint8_t> masked(B * A), row_mask;
  const auto lr = static_cast<float>(config.learning_rate);
  const auto mu = static_cast<float>(config.momentum);
  if (report) report->losses.clear();
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t r = 0; r < B; ++r) {
      const std::size_t row = uniform_index(rng, samples.sample_count);
      draw_mask(rng, A, row_mask);
      for (std::size_t a = 0; a < A; ++a) {
        const auto code = static_cast<std::int32_t>(samples.code(row, a));
        targets[r * A + a] = code;
        masked[r * A + a] = row_mask[a];
        inputs[r * A + a] = row_mask[a] ? kUnassigned : code;
      }
    }
    const double loss = net.loss(inputs, targets, masked, B, &grad);
    if (!std::isfinite(loss))
      throw TrainingError("training loss is not finite at step " + std::to_string(step) +
                          " (learning_rate=" + std::to_string(config.learning_rate) + ")");
    if (report) report->losses.push_back(loss);
    auto& p = net.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      velocity[i] = mu * velocity[i] + grad[i];
      p[i] -= lr * velocity[i];
    }
  }
  if (report) report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return DaeModel(samples.layout, samples.join_size, config, std::move(net));
}

void save_model(const DaeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  nlohmann::json header;
  header["config"] = model.config().to_json();
  header["layout"] = model.layout().describe();
  header["join_size"] = model.join_size();
  header["param_count"] = model.net().shape().param_count;
  const std::string text = header.dump();
  out.write(kModelMagic, sizeof kModelMagic);
  write_u64(out, model.layout().hash());
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (float f : model.net().params()) write_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw Error("write failed: " + path.string());
}

DaeModel load_model(const std::filesystem::path& path, const AttributeLayout& expected) {
  const std::string what = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model " + what);
  char magic[sizeof kModelMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
    throw LoadError(what + ": not a CINM1 model file");
  const std::uint64_t found = read_u64(in, what);
  if (found != expected.hash()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "declared %016llx, found %016llx", static_cast<unsigned long long>(expected.hash()),
                  static_cast<unsigned long long>(found));
    throw LoadError(what + ": layout hash mismatch (" + buf + ")");
  }
  const std::uint32_t len = read_u32(in, what);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw LoadError(what + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(what + ": corrupt header: " + e.what());
  }
  const DaeConfig config = DaeConfig::from_json(header.at("config"));
  DaeShape shape = make_dae_shape(expected.domain_sizes(), config.hidden, config.onehot_max_domain);
  if (header.at("param_count").get<std::size_t>() != shape.param_count)
    throw LoadError(what + ": parameter count does not match the layout");
  std::vector<float> params(shape.param_count);
  for (auto& p : params) p = std::bit_cast<float>(read_u32(in, what));
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(what + ": trailing bytes after weights");
  return DaeModel(expected, header.at("join_size").get<std::uint64_t>(), config,
                  DaeNet<float>(std::move(shape), std::move(params)));
}

}  // namespace cinest
