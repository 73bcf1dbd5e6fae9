#include "mtae/model.hpp"

#include <nlohmann/json.hpp>

namespace mtae {

using json = nlohmann::ordered_json;

const char* task_name(Task t) {
  switch (t) {
    case Task::emotion: return "emotion";
    case Task::gender: return "gender";
    case Task::speaker: return "speaker";
  }
  throw Error("unknown task");
}

Task task_from_name(const std::string& name) {
  if (name == "emotion") return Task::emotion;
  if (name == "gender") return Task::gender;
  if (name == "speaker") return Task::speaker;
  throw Error("unknown task name: " + name);
}

void ModelConfig::validate() const {
  if (input_h <= 0 || input_w <= 0) throw Error("model: bad input size");
  if (enc_kernel < 1 || enc_kernel % 2 == 0)
    throw Error("model: encoder kernel must be odd for same padding");
  int ph = 1, pw = 1;
  for (const auto& p : pools) {
    if ((p[0] != 2 && p[0] != 4) || (p[1] != 2 && p[1] != 4))
      throw Error("model: pool factors must be 2 or 4");
    ph *= p[0];
    pw *= p[1];
  }
  if (input_h % ph != 0 || input_w % pw != 0)
    throw Error("model: input size not divisible by pooling");
  auto latent = latent_shape();
  if (latent[1] % 2 != 0 || latent[2] % 2 != 0)
    throw Error("model: latent plane must be divisible by the head pool");
  for (int c : enc_channels)
    if (c <= 0) throw Error("model: bad channel count");
  if (head_channels <= 0 || head_hidden <= 0) throw Error("model: bad head size");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("model: dropout outside [0,1)");
  if (emotion_classes < 2) throw Error("model: need at least 2 emotion classes");
  if (multi_task) {
    if (gender_classes < 2) throw Error("model: need at least 2 gender classes");
    if (speaker_classes < 2)
      throw Error("model: multi-task model needs a speaker vocabulary");
  }
}

std::array<i64, 3> ModelConfig::latent_shape() const {
  int h = input_h, w = input_w;
  for (const auto& p : pools) {
    h /= p[0];
    w /= p[1];
  }
  return {enc_channels[2], h, w};
}

int ModelConfig::head_flat_features() const {
  auto l = latent_shape();
  return head_channels * static_cast<int>(l[1] / 2) *
         static_cast<int>(l[2] / 2);
}

std::string ModelConfig::to_json() const {
  json j;
  j["input_h"] = input_h;
  j["input_w"] = input_w;
  j["enc_channels"] = enc_channels;
  j["enc_kernel"] = enc_kernel;
  j["pools"] = pools;
  j["head_channels"] = head_channels;
  j["head_hidden"] = head_hidden;
  j["dropout"] = dropout;
  j["emotion_classes"] = emotion_classes;
  j["gender_classes"] = gender_classes;
  j["speaker_classes"] = speaker_classes;
  j["multi_task"] = multi_task;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.input_h = j.at("input_h").get<int>();
  c.input_w = j.at("input_w").get<int>();
  c.enc_channels = j.at("enc_channels").get<std::array<int, 3>>();
  c.enc_kernel = j.at("enc_kernel").get<int>();
  c.pools = j.at("pools").get<std::array<std::array<int, 2>, 3>>();
  c.head_channels = j.at("head_channels").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.emotion_classes = j.at("emotion_classes").get<int>();
  c.gender_classes = j.at("gender_classes").get<int>();
  c.speaker_classes = j.at("speaker_classes").get<int>();
  c.multi_task = j.at("multi_task").get<bool>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Head

template <typename T>
Head<T>::Head(const std::string& name, const ModelConfig& cfg, int classes,
              bool with_dropout, Rng* dropout_rng)
    : classes_(classes),
      conv_channels_(cfg.head_channels),
      conv_(name + "/conv", static_cast<int>(cfg.latent_shape()[0]),
            cfg.head_channels, 3, 3, 1, 1, 1, 1),
      pool_(2, 2),
      fc1_(name + "/fc1", cfg.head_flat_features(), cfg.head_hidden),
      with_dropout_(with_dropout),
      dropout_(static_cast<T>(with_dropout ? cfg.dropout : 0.0), dropout_rng),
      fc2_(name + "/fc2", cfg.head_hidden, classes) {
  auto l = cfg.latent_shape();
  latent_shape_ = {l[0], l[1], l[2]};
}

template <typename T>
Tensor<T> Head<T>::forward(const Tensor<T>& z, Mode mode) {
  i64 b = z.dim(0);
  Tensor<T> t = conv_.forward(z, mode);
  t = relu1_.forward(t, mode);
  t = pool_.forward(t, mode);
  t.reshape({b, t.numel() / b});
  t = fc1_.forward(t, mode);
  t = relu2_.forward(t, mode);
  if (with_dropout_) t = dropout_.forward(t, mode);
  t = fc2_.forward(t, mode);
  return softmax_.forward(t, mode);
}

template <typename T>
Tensor<T> Head<T>::backward(const Tensor<T>& grad_probs) {
  Tensor<T> g = softmax_.backward(grad_probs);
  g = fc2_.backward(g);
  if (with_dropout_) g = dropout_.backward(g);
  g = relu2_.backward(g);
  g = fc1_.backward(g);
  i64 b = g.dim(0);
  g.reshape({b, conv_channels_, latent_shape_[1] / 2, latent_shape_[2] / 2});
  g = pool_.backward(g);
  g = relu1_.backward(g);
  return conv_.backward(g);
}

template <typename T>
Tensor<T> Head<T>::hidden(const Tensor<T>& z) {
  i64 b = z.dim(0);
  Tensor<T> t = conv_.forward(z, Mode::eval);
  t = relu1_.forward(t, Mode::eval);
  t = pool_.forward(t, Mode::eval);
  t.reshape({b, t.numel() / b});
  t = fc1_.forward(t, Mode::eval);
  return relu2_.forward(t, Mode::eval);
}

template <typename T>
void Head<T>::init(Rng& rng) {
  conv_.init(rng);
  fc1_.init(rng);
  fc2_.init(rng);
}

template <typename T>
std::vector<Param<T>> Head<T>::params() {
  std::vector<Param<T>> out;
  for (auto& p : conv_.params()) out.push_back(p);
  for (auto& p : fc1_.params()) out.push_back(p);
  for (auto& p : fc2_.params()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

// The last block has no ReLU: the latent must be able to take negative
// values, or no encoder output could ever match the zero-mean Gaussian prior
// and the regularization phase would be fighting a sign test it cannot win.
template <typename T>
Encoder<T>::Encoder(const ModelConfig& cfg) {
  int pad = cfg.enc_kernel / 2;
  int in_ch = 1;
  for (int i = 0; i < 3; ++i) {
    std::string idx = std::to_string(i + 1);
    convs_.emplace_back("enc/conv" + idx, in_ch, cfg.enc_channels[i],
                        cfg.enc_kernel, cfg.enc_kernel, 1, 1, pad, pad);
    bns_.emplace_back("enc/bn" + idx, cfg.enc_channels[i]);
    if (i < 2) relus_.emplace_back();
    pools_.emplace_back(cfg.pools[i][0], cfg.pools[i][1]);
    in_ch = cfg.enc_channels[i];
  }
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> t = x;
  for (size_t i = 0; i < convs_.size(); ++i) {
    t = convs_[i].forward(t, mode);
    t = bns_[i].forward(t, mode);
    if (i < relus_.size()) t = relus_[i].forward(t, mode);
    t = pools_[i].forward(t, mode);
  }
  return t;
}

template <typename T>
Tensor<T> Encoder<T>::backward(const Tensor<T>& grad_z) {
  Tensor<T> g = grad_z;
  for (size_t i = convs_.size(); i-- > 0;) {
    g = pools_[i].backward(g);
    if (i < relus_.size()) g = relus_[i].backward(g);
    g = bns_[i].backward(g);
    g = convs_[i].backward(g);
  }
  return g;
}

template <typename T>
void Encoder<T>::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
}

template <typename T>
std::vector<Param<T>> Encoder<T>::params() {
  std::vector<Param<T>> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    for (auto& p : convs_[i].params()) out.push_back(p);
    for (auto& p : bns_[i].params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<Param<T>> Encoder<T>::state() {
  std::vector<Param<T>> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    for (auto& p : convs_[i].params()) out.push_back(p);
    for (auto& p : bns_[i].state_params()) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoder

template <typename T>
Decoder<T>::Decoder(const ModelConfig& cfg) {
  std::array<int, 4> chain = {cfg.enc_channels[2], cfg.enc_channels[1],
                              cfg.enc_channels[0], 1};
  for (int i = 0; i < 3; ++i) {
    std::string idx = std::to_string(i + 1);
    auto stride = cfg.pools[2 - i];
    int ph = (4 - stride[0]) / 2, pw = (4 - stride[1]) / 2;
    tconvs_.emplace_back("dec/tconv" + idx, chain[i], chain[i + 1], 4, 4,
                         stride[0], stride[1], ph, pw);
    if (i < 2) {
      bns_.emplace_back("dec/bn" + idx, chain[i + 1]);
      relus_.emplace_back();
    }
  }
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& z, Mode mode) {
  Tensor<T> t = z;
  for (size_t i = 0; i < tconvs_.size(); ++i) {
    t = tconvs_[i].forward(t, mode);
    if (i < bns_.size()) {
      t = bns_[i].forward(t, mode);
      t = relus_[i].forward(t, mode);
    }
  }
  return t;
}

template <typename T>
Tensor<T> Decoder<T>::backward(const Tensor<T>& grad_x) {
  Tensor<T> g = grad_x;
  for (size_t i = tconvs_.size(); i-- > 0;) {
    if (i < bns_.size()) {
      g = relus_[i].backward(g);
      g = bns_[i].backward(g);
    }
    g = tconvs_[i].backward(g);
  }
  return g;
}

template <typename T>
void Decoder<T>::init(Rng& rng) {
  for (auto& t : tconvs_) t.init(rng);
}

template <typename T>
std::vector<Param<T>> Decoder<T>::params() {
  std::vector<Param<T>> out;
  for (size_t i = 0; i < tconvs_.size(); ++i) {
    for (auto& p : tconvs_[i].params()) out.push_back(p);
    if (i < bns_.size())
      for (auto& p : bns_[i].params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<Param<T>> Decoder<T>::state() {
  std::vector<Param<T>> out;
  for (size_t i = 0; i < tconvs_.size(); ++i) {
    for (auto& p : tconvs_[i].params()) out.push_back(p);
    if (i < bns_.size())
      for (auto& p : bns_[i].state_params()) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// AAEModel

template <typename T>
AAEModel<T>::AAEModel(const ModelConfig& cfg, u64 seed)
    : cfg_(cfg),
      dropout_rng_(derive_seed(seed, "dropout")),
      seed_(seed),
      enc_(cfg),
      dec_(cfg),
      disc_("disc", cfg, 2, false, nullptr) {
  cfg_.validate();
  emotion_.emplace("head/emotion", cfg_, cfg_.emotion_classes, true,
                   &dropout_rng_);
  if (cfg_.multi_task) {
    gender_.emplace("head/gender", cfg_, cfg_.gender_classes, true,
                    &dropout_rng_);
    speaker_.emplace("head/speaker", cfg_, cfg_.speaker_classes, true,
                     &dropout_rng_);
  }
}

template <typename T>
bool AAEModel<T>::has_task(Task t) const {
  switch (t) {
    case Task::emotion: return emotion_.has_value();
    case Task::gender: return gender_.has_value();
    case Task::speaker: return speaker_.has_value();
  }
  return false;
}

template <typename T>
std::vector<Task> AAEModel<T>::tasks() const {
  std::vector<Task> out = {Task::emotion};
  if (gender_) out.push_back(Task::gender);
  if (speaker_) out.push_back(Task::speaker);
  return out;
}

template <typename T>
Head<T>& AAEModel<T>::head(Task t) {
  std::optional<Head<T>>* h = nullptr;
  switch (t) {
    case Task::emotion: h = &emotion_; break;
    case Task::gender: h = &gender_; break;
    case Task::speaker: h = &speaker_; break;
  }
  if (!h || !h->has_value())
    throw Error(std::string("model has no ") + task_name(t) + " head");
  return h->value();
}

template <typename T>
Tensor<T> AAEModel<T>::encode(const Tensor<T>& x, Mode mode) {
  require_shape(x, {x.dim(0), 1, cfg_.input_h, cfg_.input_w}, "encode");
  return enc_.forward(x, mode);
}

template <typename T>
Tensor<T> AAEModel<T>::decode(const Tensor<T>& z, Mode mode) {
  return dec_.forward(z, mode);
}

template <typename T>
Tensor<T> AAEModel<T>::discriminate(const Tensor<T>& z, Mode mode) {
  return disc_.forward(z, mode);
}

template <typename T>
Tensor<T> AAEModel<T>::classify(Task t, const Tensor<T>& z, Mode mode) {
  return head(t).forward(z, mode);
}

template <typename T>
Tensor<T> AAEModel<T>::dvector(const Tensor<T>& z) {
  return head(Task::speaker).hidden(z);
}

template <typename T>
Tensor<T> AAEModel<T>::encoder_backward(const Tensor<T>& grad_z) {
  return enc_.backward(grad_z);
}

template <typename T>
Tensor<T> AAEModel<T>::decoder_backward(const Tensor<T>& grad_xhat) {
  return dec_.backward(grad_xhat);
}

template <typename T>
Tensor<T> AAEModel<T>::discriminator_backward(const Tensor<T>& grad_probs) {
  return disc_.backward(grad_probs);
}

template <typename T>
Tensor<T> AAEModel<T>::head_backward(Task t, const Tensor<T>& grad_probs) {
  return head(t).backward(grad_probs);
}

template <typename T>
void AAEModel<T>::init_params() {
  Rng enc_rng(derive_seed(seed_, "init/enc"));
  enc_.init(enc_rng);
  Rng dec_rng(derive_seed(seed_, "init/dec"));
  dec_.init(dec_rng);
  Rng disc_rng(derive_seed(seed_, "init/disc"));
  disc_.init(disc_rng);
  for (Task t : tasks()) {
    Rng rng(derive_seed(seed_, std::string("init/head/") + task_name(t)));
    head(t).init(rng);
  }
}

template <typename T>
std::vector<Param<T>> AAEModel<T>::head_params(Task t) {
  return head(t).params();
}

template <typename T>
std::vector<Param<T>> AAEModel<T>::all_params() {
  std::vector<Param<T>> out;
  for (auto& p : enc_.params()) out.push_back(p);
  for (auto& p : dec_.params()) out.push_back(p);
  for (auto& p : disc_.params()) out.push_back(p);
  for (Task t : tasks())
    for (auto& p : head(t).params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Param<T>> AAEModel<T>::state_tensors() {
  std::vector<Param<T>> out;
  for (auto& p : enc_.state()) out.push_back(p);
  for (auto& p : dec_.state()) out.push_back(p);
  for (auto& p : disc_.params()) out.push_back(p);
  for (Task t : tasks())
    for (auto& p : head(t).params()) out.push_back(p);
  return out;
}

template <typename T>
void AAEModel<T>::set_dropout_frozen(bool frozen) {
  for (Task t : tasks()) head(t).dropout().set_freeze_mask(frozen);
}

template <typename T>
std::vector<T> AAEModel<T>::snapshot() {
  std::vector<T> out;
  for (auto& p : state_tensors())
    out.insert(out.end(), p.tensor->data().begin(), p.tensor->data().end());
  return out;
}

template <typename T>
void AAEModel<T>::restore(const std::vector<T>& snap) {
  size_t at = 0;
  for (auto& p : state_tensors()) {
    size_t n = static_cast<size_t>(p.tensor->numel());
    if (at + n > snap.size()) throw Error("model restore: snapshot too small");
    std::copy(snap.begin() + static_cast<std::ptrdiff_t>(at),
              snap.begin() + static_cast<std::ptrdiff_t>(at + n),
              p.tensor->data().begin());
    at += n;
  }
  if (at != snap.size()) throw Error("model restore: snapshot size mismatch");
}

template <typename T>
std::vector<NamedTensorF32> AAEModel<T>::to_groups() {
  std::vector<NamedTensorF32> out;
  for (auto& p : state_tensors()) {
    NamedTensorF32 g;
    g.name = p.name;
    g.shape = p.tensor->shape();
    g.values.reserve(static_cast<size_t>(p.tensor->numel()));
    for (T v : p.tensor->data()) g.values.push_back(static_cast<float>(v));
    out.push_back(std::move(g));
  }
  return out;
}

template <typename T>
void AAEModel<T>::load_groups(const std::vector<NamedTensorF32>& groups) {
  auto state = state_tensors();
  if (groups.size() != state.size())
    throw Error("checkpoint: group count mismatch: file has " +
                std::to_string(groups.size()) + ", model needs " +
                std::to_string(state.size()));
  for (size_t i = 0; i < state.size(); ++i) {
    const NamedTensorF32& g = groups[i];
    if (g.name != state[i].name)
      throw Error("checkpoint: group " + std::to_string(i) + " is " + g.name +
                  ", expected " + state[i].name);
    if (g.shape != state[i].tensor->shape())
      throw Error("checkpoint: shape mismatch in group " + g.name);
    auto& dst = state[i].tensor->data();
    for (size_t j = 0; j < g.values.size(); ++j)
      dst[j] = static_cast<T>(g.values[j]);
  }
}

template class Head<float>;
template class Head<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class AAEModel<float>;
template class AAEModel<double>;

}  // namespace mtae
