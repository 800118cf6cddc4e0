#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "twoview/netforge/configs.hpp"
#include "twoview/netforge/graph.hpp"

namespace twoview::netforge {

// fnmatch-style glob on group names: '*' any run, '?' one character.
// Multiple patterns may be separated by '|'.
inline bool glob_match_one(const char* pat, const char* str) {
  if (*pat == '\0') return *str == '\0';
  if (*pat == '*') {
    for (const char* s = str;; ++s) {
      if (glob_match_one(pat + 1, s)) return true;
      if (*s == '\0') return false;
    }
  }
  if (*str == '\0') return false;
  if (*pat == '?' || *pat == *str) return glob_match_one(pat + 1, str + 1);
  return false;
}

inline bool glob_match(const std::string& patterns, const std::string& str) {
  std::size_t start = 0;
  while (start <= patterns.size()) {
    std::size_t bar = patterns.find('|', start);
    const std::string pat =
        patterns.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    if (glob_match_one(pat.c_str(), str.c_str())) return true;
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return false;
}

struct GroupInfo {
  std::string name;
  Scope scope = Scope::Backbone;
  bool trainable = true;
};

// A built network: an ordered node list (already topologically sorted by
// construction), named parameter tensors, per-group trainable flags, and the
// recipe that rebuilds the topology.
template <typename T>
class ModelGraph {
 public:
  std::vector<std::unique_ptr<Node<T>>> nodes;
  std::vector<int> input_node_ids;  // by input index (CC first)
  int feature_node = -1;            // backbone top (or concat for two-view)
  int logits_node = -1;             // dense feeding the softmax
  int softmax_node = -1;
  int n_inputs = 1;
  Shape input_dims{1, 0, 0};  // one grayscale channel per view
  Recipe recipe;

  const std::string& stage() const { return recipe.stage; }

  // ---- construction helpers ----

  template <typename NodeT, typename... Args>
  int add(Scope scope, const std::string& group, std::vector<int> inputs, Args&&... args) {
    auto node = std::make_unique<NodeT>(std::forward<Args>(args)...);
    node->id = static_cast<int>(nodes.size());
    node->group = group;
    node->scope = scope;
    node->inputs = std::move(inputs);
    nodes.push_back(std::move(node));
    return nodes.size() - 1;
  }

  void finalize() {
    params_.clear();
    group_order_.clear();
    group_info_.clear();
    int next_id = 0;
    for (auto& n : nodes) {
      auto ps = n->params();
      if (!ps.empty() && n->group.empty())
        throw ConfigError("parameterized node without a group name");
      for (auto* p : ps) {
        p->id = next_id++;
        p->name = n->group + "." + (p->name.find('.') == std::string::npos
                                        ? p->name
                                        : p->name.substr(p->name.rfind('.') + 1));
        params_.push_back(p);
      }
      if (!ps.empty() && group_info_.find(n->group) == group_info_.end()) {
        group_info_[n->group] = {n->group, n->scope, true};
        group_order_.push_back(n->group);
      }
    }
    shapes_ = infer_shapes();
    refresh_active();
  }

  // ---- introspection ----

  std::vector<Shape> infer_shapes() const {
    std::vector<Shape> shapes(nodes.size());
    for (const auto& n : nodes) {
      std::vector<Shape> in;
      if (auto* inp = dynamic_cast<const InputNode<T>*>(n.get())) {
        (void)inp;
        in.push_back(input_dims);
      } else {
        for (int j : n->inputs) in.push_back(shapes[j]);
      }
      shapes[n->id] = n->infer(in);
    }
    return shapes;
  }

  const std::vector<Shape>& shapes() const { return shapes_; }
  Shape output_shape() const { return shapes_.at(softmax_node >= 0 ? softmax_node : nodes.size() - 1); }
  Shape feature_shape() const { return shapes_.at(feature_node); }

  const std::vector<ParamTensor<T>*>& params() const { return params_; }

  ParamTensor<T>* find_param(const std::string& name) const {
    for (auto* p : params_)
      if (p->name == name) return p;
    return nullptr;
  }

  std::vector<GroupInfo> groups() const {
    std::vector<GroupInfo> out;
    for (const auto& g : group_order_) out.push_back(group_info_.at(g));
    return out;
  }

  Scope group_scope(const std::string& g) const { return group_info_.at(g).scope; }
  bool group_trainable(const std::string& g) const { return group_info_.at(g).trainable; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto* p : params_)
      if (!p->is_buffer) n += p->value.size();
    return n;
  }

  // ---- trainable flags ----

  // Sets the frozen state of every group matching the glob selector.
  int set_trainable(const std::string& selector, bool frozen) {
    int matched = 0;
    for (auto& [name, info] : group_info_)
      if (glob_match(selector, name)) {
        info.trainable = !frozen;
        ++matched;
      }
    if (matched == 0) throw ConfigError("selector '" + selector + "' matches no layer group");
    refresh_active();
    return matched;
  }

  // Makes exactly the matching groups trainable and freezes the rest.
  int set_trainable_exactly(const std::string& selector) {
    int matched = 0;
    for (auto& [name, info] : group_info_) {
      info.trainable = glob_match(selector, name);
      matched += info.trainable;
    }
    if (matched == 0) throw ConfigError("selector '" + selector + "' matches no layer group");
    refresh_active();
    return matched;
  }

  bool param_trainable(const ParamTensor<T>* p) const {
    if (p->is_buffer) return false;
    const auto dot = p->name.rfind('.');
    return group_trainable(p->name.substr(0, dot));
  }

  // True where the backward pass must descend: the node owns trainable
  // parameters or feeds (transitively) a node that does.
  const std::vector<bool>& active() const { return active_; }

  void refresh_active() {
    active_.assign(nodes.size(), false);
    for (const auto& n : nodes) {
      bool own = false;
      if (!n->group.empty() && !n->params().empty() && group_info_.at(n->group).trainable) {
        for (auto* p : n->params())
          if (!p->is_buffer) own = true;
      }
      bool from_inputs = false;
      for (int j : n->inputs) from_inputs = from_inputs || active_[j];
      active_[n->id] = own || from_inputs;
    }
  }

  // ---- execution ----

  GradBuffers<T> make_grad_buffers() const {
    GradBuffers<T> b;
    b.grads.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) b.grads[i].resize(params_[i]->value.shape());
    b.norm_sum.resize(nodes.size());
    b.norm_sumsq.resize(nodes.size());
    return b;
  }

  static void reduce_into(GradBuffers<T>& dst, const GradBuffers<T>& src) {
    for (std::size_t i = 0; i < dst.grads.size(); ++i)
      for (std::size_t k = 0; k < dst.grads[i].size(); ++k) dst.grads[i].v[k] += src.grads[i].v[k];
    for (std::size_t n = 0; n < dst.norm_sum.size(); ++n) {
      if (src.norm_sum[n].empty()) continue;
      if (dst.norm_sum[n].empty()) {
        dst.norm_sum[n] = src.norm_sum[n];
        dst.norm_sumsq[n] = src.norm_sumsq[n];
      } else {
        for (std::size_t c = 0; c < src.norm_sum[n].size(); ++c) {
          dst.norm_sum[n][c] += src.norm_sum[n][c];
          dst.norm_sumsq[n][c] += src.norm_sumsq[n][c];
        }
      }
    }
    dst.norm_count += src.norm_count;
  }

  // Forward over one sample (one tensor per view). When `stats` is given,
  // normalization layers in trainable groups accumulate batch moments.
  void forward_sample(const std::vector<Tensor<T>>& views, SampleContext<T>& ctx,
                      GradBuffers<T>* stats = nullptr) const {
    if (static_cast<int>(views.size()) != n_inputs)
      throw ConfigError("model expects " + std::to_string(n_inputs) + " input views, got " +
                        std::to_string(views.size()));
    for (const auto& v : views)
      if (v.shape().h != input_dims.h || v.shape().w != input_dims.w || v.c != 1)
        throw ConfigError("input shape " + v.shape().str() + " does not match model input 1x" +
                          std::to_string(input_dims.h) + "x" + std::to_string(input_dims.w));
    ctx.act.assign(nodes.size(), Tensor<T>{});
    std::vector<const Tensor<T>*> in;
    for (const auto& n : nodes) {
      in.clear();
      if (auto* inp = dynamic_cast<const InputNode<T>*>(n.get())) {
        in.push_back(&views[inp->input_index()]);
      } else {
        for (int j : n->inputs) in.push_back(&ctx.act[j]);
      }
      n->forward(in, ctx.act[n->id]);
      if (stats && !in.empty() && !n->group.empty() && group_info_.at(n->group).trainable)
        n->accumulate_stats(*in[0], *stats);
    }
    if (stats) ++stats->norm_count;
  }

  const Tensor<T>& probabilities(const SampleContext<T>& ctx) const {
    return ctx.act[softmax_node];
  }

  // Backward from a gradient seeded at `start_node`; consumes ctx activations.
  void backward_from(int start_node, const Tensor<T>& seed, SampleContext<T>& ctx,
                     GradBuffers<T>& sink) const {
    ctx.grad.assign(nodes.size(), Tensor<T>{});
    ctx.grad[start_node] = seed;
    std::vector<const Tensor<T>*> in;
    std::vector<Tensor<T>*> din;
    for (int id = start_node; id >= 0; --id) {
      const auto& n = nodes[id];
      if (ctx.grad[id].size() == 0 || !active_[id]) continue;
      in.clear();
      din.clear();
      const bool is_input_node = dynamic_cast<const InputNode<T>*>(n.get()) != nullptr;
      if (is_input_node) continue;
      for (int j : n->inputs) {
        in.push_back(&ctx.act[j]);
        if (active_[j]) {
          if (ctx.grad[j].size() == 0) ctx.grad[j].resize(ctx.act[j].shape());
          din.push_back(&ctx.grad[j]);
        } else {
          din.push_back(nullptr);
        }
      }
      n->backward(in, ctx.act[id], ctx.grad[id], din, sink);
      ctx.act[id] = Tensor<T>{};  // release as soon as consumed
      ctx.grad[id] = Tensor<T>{};
    }
  }

  void backward_from_logits(const Tensor<T>& dlogits, SampleContext<T>& ctx,
                            GradBuffers<T>& sink) const {
    backward_from(logits_node, dlogits, ctx, sink);
  }

  void backward_from_probabilities(const Tensor<T>& dprobs, SampleContext<T>& ctx,
                                   GradBuffers<T>& sink) const {
    backward_from(softmax_node, dprobs, ctx, sink);
  }

  // Updates normalization running statistics from accumulated batch moments.
  void apply_norm_updates(const GradBuffers<T>& buffers, double momentum) {
    for (auto& n : nodes) {
      if (buffers.norm_sum[n->id].empty()) continue;
      if (auto* bn = dynamic_cast<BatchNormNode<T>*>(n.get()))
        bn->update_stats(buffers.norm_sum[n->id], buffers.norm_sumsq[n->id], buffers.norm_count,
                         momentum);
    }
  }

  // Pure batched inference: rows of class probabilities.
  std::vector<std::vector<T>> forward_batch(const std::vector<std::vector<Tensor<T>>>& batch,
                                            int n_threads = 1) const {
    std::vector<std::vector<T>> out(batch.size());
    parallel_chunks(batch.size(), n_threads, [&](int, std::size_t b, std::size_t e) {
      SampleContext<T> ctx;
      for (std::size_t i = b; i < e; ++i) {
        forward_sample(batch[i], ctx);
        const auto& p = probabilities(ctx);
        out[i].assign(p.v.begin(), p.v.end());
      }
    });
    return out;
  }

 private:
  std::vector<ParamTensor<T>*> params_;
  std::vector<std::string> group_order_;
  std::map<std::string, GroupInfo> group_info_;
  std::vector<Shape> shapes_;
  std::vector<bool> active_;
};

}  // namespace twoview::netforge
