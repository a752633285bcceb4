#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsf/rng.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

enum class Init { trunc_normal, zeros, ones };

// Named parameter registry. Registration order is the serialization order and
// pins the RNG consumption sequence, so checkpoints and reruns line up as long
// as the model is built the same way.
template <typename T>
class ParamStore {
 public:
  Tensor<T> param(const std::string& name, Shape shape, Init init, Rng& rng) {
    Tensor<T> t = make(std::move(shape), init, rng, true);
    insert(names_, map_, name, t);
    return t;
  }

  Tensor<T> buffer(const std::string& name, Shape shape, Init init, Rng& rng) {
    Tensor<T> t = make(std::move(shape), init, rng, false);
    insert(buffer_names_, buffer_map_, name, t);
    return t;
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& buffer_names() const { return buffer_names_; }

  Tensor<T>& get(const std::string& name) {
    auto it = map_.find(name);
    if (it == map_.end()) throw std::out_of_range("ParamStore: no parameter named " + name);
    return it->second;
  }
  Tensor<T>& get_buffer(const std::string& name) {
    auto it = buffer_map_.find(name);
    if (it == buffer_map_.end()) throw std::out_of_range("ParamStore: no buffer named " + name);
    return it->second;
  }

  void zero_grads() {
    for (const auto& n : names_) map_.at(n).zero_grad();
  }

  int64_t count() const {
    int64_t total = 0;
    for (const auto& n : names_) total += map_.at(n).size();
    return total;
  }

 private:
  static Tensor<T> make(Shape shape, Init init, Rng& rng, bool requires_grad) {
    int64_t n = shape_numel(shape);
    std::vector<T> v(static_cast<size_t>(n));
    switch (init) {
      case Init::trunc_normal:
        for (auto& x : v) x = static_cast<T>(rng.truncated_normal(0.02));
        break;
      case Init::zeros:
        break;
      case Init::ones:
        for (auto& x : v) x = T(1);
        break;
    }
    return Tensor<T>::from(std::move(shape), std::move(v), requires_grad);
  }

  static void insert(std::vector<std::string>& names,
                     std::unordered_map<std::string, Tensor<T>>& map, const std::string& name,
                     Tensor<T> t) {
    if (!map.emplace(name, std::move(t)).second)
      throw std::invalid_argument("ParamStore: duplicate name " + name);
    names.push_back(name);
  }

  std::vector<std::string> names_;
  std::vector<std::string> buffer_names_;
  std::unordered_map<std::string, Tensor<T>> map_;
  std::unordered_map<std::string, Tensor<T>> buffer_map_;
};

// The usual attention parameter bundle shared by both branches. `inner` may
// differ from the model width when the head count does not divide it; the
// output projection always maps back to the input width.
template <typename T>
struct AttnParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

  static AttnParams create(ParamStore<T>& store, const std::string& prefix, int64_t width,
                           int64_t inner, Rng& rng) {
    AttnParams p;
    p.wq = store.param(prefix + ".wq", {width, inner}, Init::trunc_normal, rng);
    p.bq = store.param(prefix + ".bq", {inner}, Init::zeros, rng);
    p.wk = store.param(prefix + ".wk", {width, inner}, Init::trunc_normal, rng);
    p.bk = store.param(prefix + ".bk", {inner}, Init::zeros, rng);
    p.wv = store.param(prefix + ".wv", {width, inner}, Init::trunc_normal, rng);
    p.bv = store.param(prefix + ".bv", {inner}, Init::zeros, rng);
    p.wo = store.param(prefix + ".wo", {inner, width}, Init::trunc_normal, rng);
    p.bo = store.param(prefix + ".bo", {width}, Init::zeros, rng);
    return p;
  }
};

template <typename T>
struct NormParams {
  Tensor<T> gamma, beta;

  static NormParams create(ParamStore<T>& store, const std::string& prefix, int64_t width,
                           Rng& rng) {
    NormParams p;
    p.gamma = store.param(prefix + ".gamma", {width}, Init::ones, rng);
    p.beta = store.param(prefix + ".beta", {width}, Init::zeros, rng);
    return p;
  }
};

template <typename T>
struct MlpParams {
  Tensor<T> w1, b1, w2, b2;

  static MlpParams create(ParamStore<T>& store, const std::string& prefix, int64_t width,
                          int64_t hidden, Rng& rng) {
    MlpParams p;
    p.w1 = store.param(prefix + ".w1", {width, hidden}, Init::trunc_normal, rng);
    p.b1 = store.param(prefix + ".b1", {hidden}, Init::zeros, rng);
    p.w2 = store.param(prefix + ".w2", {hidden, width}, Init::trunc_normal, rng);
    p.b2 = store.param(prefix + ".b2", {width}, Init::zeros, rng);
    return p;
  }
};

}  // namespace hsf
