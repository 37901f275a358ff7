#include <Eigen/Dense>
#include <cmath>

#include "opbench/errors.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::zoo {

using ag::Tensor;

Tensor sensor_samples(const Tensor& x, const GridSpec& grid, std::size_t sensors) {
  const std::size_t B = x.dim(0), C = x.shape().back();
  Tensor h = x;
  for (std::size_t a = 0; a < grid.ndim(); ++a)
    h = ag::axis_map(h, a + 1, interpolation_matrix(grid.shape[a], grid.layout, sensors), sensors);
  std::size_t lattice = 1;
  for (std::size_t a = 0; a < grid.ndim(); ++a) lattice *= sensors;
  return ag::reshape(h, {B, lattice * C});
}

Tensor deeponet_combine(const Tensor& branch, const Tensor& trunk, const Tensor& bias, std::size_t p) {
  const std::size_t B = branch.dim(0), Q = trunk.dim(0), C = bias.size();
  if (branch.dim(1) != C * p || trunk.dim(1) != C * p)
    throw ShapeError("deeponet: branch/trunk widths must equal p * output channels");
  Tensor b = ag::permute(ag::reshape(branch, {B, C, p}), {1, 0, 2});
  Tensor t = ag::permute(ag::reshape(trunk, {Q, C, p}), {1, 0, 2});
  Tensor out = ag::permute(ag::bmm(b, t, false, true), {1, 2, 0});
  return ag::add_bias(out, bias);
}

// ------------------------------------------------------------------ DeepONet

namespace {

std::size_t lattice_size(std::size_t sensors, std::size_t ndim) { return ndim == 2 ? sensors * sensors : sensors; }

}  // namespace

DeepONet::DeepONet(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("deeponet", std::move(options), std::move(ctx), seed) {
  const std::size_t out = opt("p") * ctx_.out_channels;
  std::vector<std::size_t> b{sensor_values()}, t{ctx_.grid.ndim()};
  for (std::size_t i = 0; i < opt("depth"); ++i) b.push_back(opt("width"));
  for (std::size_t i = 0; i < opt("trunk_depth"); ++i) t.push_back(opt("trunk_width"));
  b.push_back(out);
  t.push_back(out);
  branch_ = add_mlp("branch", b);
  trunk_ = add_mlp("trunk", t);
  bias_ = add_zeros("bias", {ctx_.out_channels});
}

std::size_t DeepONet::sensor_values() const {
  return lattice_size(opt("sensors"), ctx_.grid.ndim()) * ctx_.in_channels;
}

Tensor DeepONet::forward_sensors(const Tensor& sensors, const Tensor& queries) const {
  if (sensors.rank() != 2 || sensors.dim(1) != sensor_values())
    throw ShapeError("deeponet expects " + std::to_string(sensor_values()) + " sensor values per sample, got " +
                     ag::shape_str(sensors.shape()));
  if (queries.rank() != 2 || queries.dim(1) != ctx_.grid.ndim())
    throw ShapeError("deeponet queries must be [Q, " + std::to_string(ctx_.grid.ndim()) + "]");
  return deeponet_combine(branch_(sensors), trunk_(queries), bias_, opt("p"));
}

Tensor DeepONet::forward(const Tensor& x, const GridSpec& grid) const {
  if (grid.ndim() != ctx_.grid.ndim()) throw ShapeError("deeponet: grid dimension mismatch");
  check_batch(x, grid, ctx_.in_channels);
  Tensor q = ag::constant({grid.points(), grid.ndim()}, unit_coordinates(grid));
  Tensor out = forward_sensors(sensor_samples(x, grid, opt("sensors")), q);
  return ag::reshape(out, batch_shape(grid, x.dim(0), ctx_.out_channels));
}

// ------------------------------------------------------------------ POD

PodBasis compute_pod_basis(const std::vector<const std::vector<double>*>& outputs, std::size_t p) {
  if (outputs.empty()) throw ConfigError("POD needs at least one training sample");
  const std::size_t N = outputs.size(), n = outputs.front()->size();
  if (p == 0 || p > std::min(N, n))
    throw ConfigError("POD mode count p=" + std::to_string(p) + " exceeds min(samples, points) = " +
                      std::to_string(std::min(N, n)));
  PodBasis b;
  b.n = n;
  b.p = p;
  b.mean.assign(n, 0.0);
  for (const auto* o : outputs) {
    if (o->size() != n) throw ShapeError("POD snapshots differ in length");
    for (std::size_t i = 0; i < n; ++i) b.mean[i] += (*o)[i];
  }
  for (auto& m : b.mean) m /= double(N);
  Eigen::MatrixXd X(n, N);
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t i = 0; i < n; ++i) X(i, k) = (*outputs[k])[i] - b.mean[i];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const auto& U = svd.matrixU();
  const auto& S = svd.singularValues();
  b.singular.assign(S.data(), S.data() + S.size());
  b.modes.assign(p * n, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    Eigen::Index arg = 0;
    U.col(k).cwiseAbs().maxCoeff(&arg);
    const double sign = U(arg, k) < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) b.modes[k * n + i] = sign * U(i, k);
  }
  return b;
}

std::size_t pod_energy_modes(const PodBasis& b, double energy) {
  double total = 0.0;
  for (double s : b.singular) total += s * s;
  if (total <= 0.0) return 1;
  double acc = 0.0;
  for (std::size_t k = 0; k < b.singular.size(); ++k) {
    acc += b.singular[k] * b.singular[k];
    if (acc >= energy * total) return k + 1;
  }
  return b.singular.size();
}

PodDeepONet::PodDeepONet(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("pod-deeponet", std::move(options), std::move(ctx), seed) {
  const std::size_t p = opt("p"), n = ctx_.grid.points() * ctx_.out_channels;
  std::vector<std::size_t> dims{lattice_size(opt("sensors"), ctx_.grid.ndim()) * ctx_.in_channels};
  for (std::size_t i = 0; i < opt("depth"); ++i) dims.push_back(opt("width"));
  dims.push_back(p);
  branch_ = add_mlp("branch", dims);
  add_buffer("pod.mean", {n}, std::vector<double>(n, 0.0));
  add_buffer("pod.basis", {p, n}, std::vector<double>(p * n, 0.0));
  add_buffer("pod.active", {1}, {0.0});
}

void PodDeepONet::prepare(const std::vector<const std::vector<double>*>& train_outputs) {
  const PodBasis b = compute_pod_basis(train_outputs, opt("p"));
  if (b.n != ctx_.grid.points() * ctx_.out_channels) throw ShapeError("POD snapshots do not match the model grid");
  const std::size_t active = std::min(b.p, pod_energy_modes(b, options_.at("energy").get<double>()));
  std::vector<double> modes = b.modes;
  std::fill(modes.begin() + std::ptrdiff_t(active * b.n), modes.end(), 0.0);
  param("pod.mean").value.mutable_value() = b.mean;
  param("pod.basis").value.mutable_value() = std::move(modes);
  param("pod.active").value.mutable_value() = {double(active)};
}

std::size_t PodDeepONet::active_modes() const { return std::size_t(param("pod.active").value.value()[0]); }

Tensor PodDeepONet::predict_from_coefficients(const Tensor& b) const {
  Tensor out = ag::add_bias(ag::matmul(b, param("pod.basis").value), param("pod.mean").value);
  return ag::reshape(out, batch_shape(ctx_.grid, b.dim(0), ctx_.out_channels));
}

Tensor PodDeepONet::forward(const Tensor& x, const GridSpec& grid) const {
  if (!(grid == ctx_.grid))
    throw ShapeError("POD basis lives on the training grid; got a different grid");
  check_batch(x, grid, ctx_.in_channels);
  if (active_modes() == 0) throw ConfigError("pod-deeponet basis has not been prepared");
  return predict_from_coefficients(branch_(sensor_samples(x, grid, opt("sensors"))));
}

}  // namespace opbench::zoo
