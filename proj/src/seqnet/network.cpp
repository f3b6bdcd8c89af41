#include "hgr/seqnet/network.hpp"

#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "hgr/core_model.hpp"
#include "hgr/seqnet/loss.hpp"
#include "hgr/text_io.hpp"

namespace hgr::seqnet {

namespace {
constexpr std::string_view kCheckpointMagic = "hgr-seqnet";
constexpr int kCheckpointVersion = 1;
}  // namespace

SequenceNet::SequenceNet(const SequenceNet& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

SequenceNet& SequenceNet::operator=(const SequenceNet& other) {
  if (this != &other) {
    SequenceNet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

SequenceNet& SequenceNet::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

void SequenceNet::validate() const {
  if (layers_.empty()) throw Error("network has no layers");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i]->input_width() != layers_[i - 1]->output_width()) {
      throw Error("layer " + std::to_string(i) + " (" + layers_[i]->describe() + ") expects width " +
                  std::to_string(layers_[i]->input_width()) + " but layer " + std::to_string(i - 1) +
                  " produces " + std::to_string(layers_[i - 1]->output_width()));
    }
  }
}

std::size_t SequenceNet::input_width() const { return layers_.empty() ? 0 : layers_.front()->input_width(); }
std::size_t SequenceNet::output_width() const { return layers_.empty() ? 0 : layers_.back()->output_width(); }

void SequenceNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l->init(rng);
}

Matrix SequenceNet::forward(const Matrix& x, const SequenceLayout& layout, Mode mode, Trace* trace) {
  validate();
  if (static_cast<std::size_t>(x.rows()) != layout.total_rows()) {
    throw Error("forward: layout covers " + std::to_string(layout.total_rows()) + " rows, input has " +
                std::to_string(x.rows()));
  }
  Trace local;
  Trace& t = trace ? *trace : local;
  t.caches.assign(layers_.size(), LayerCache{});
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      h = layers_[i]->forward(h, layout, mode, t.caches[i]);
    } catch (const Error& e) {
      throw Error("layer " + std::to_string(i) + " (" + std::string(layers_[i]->kind()) + "): " + e.what());
    }
    if (mode == Mode::Train) layers_[i]->commit(t.caches[i]);
  }
  return h;
}

Matrix SequenceNet::infer(const Matrix& x, const SequenceLayout& layout) const {
  validate();
  if (static_cast<std::size_t>(x.rows()) != layout.total_rows()) {
    throw Error("infer: layout covers " + std::to_string(layout.total_rows()) + " rows, input has " +
                std::to_string(x.rows()));
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerCache cache;
    try {
      h = layers_[i]->forward(h, layout, Mode::Infer, cache);
    } catch (const Error& e) {
      throw Error("layer " + std::to_string(i) + " (" + std::string(layers_[i]->kind()) + "): " + e.what());
    }
  }
  return h;
}

Matrix SequenceNet::predict_proba(const Matrix& x, const SequenceLayout& layout) const {
  return softmax_rows(infer(x, layout));
}

Matrix SequenceNet::backward(const Matrix& grad_logits, const SequenceLayout& layout, const Trace& trace) {
  if (trace.caches.size() != layers_.size()) throw Error("backward: trace does not match network");
  Matrix g = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, layout, trace.caches[i]);
  return g;
}

std::vector<Tensor*> SequenceNet::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* t : l->parameters()) out.push_back(t);
  }
  return out;
}

std::vector<Tensor*> SequenceNet::buffers() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* t : l->buffers()) out.push_back(t);
  }
  return out;
}

std::size_t SequenceNet::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : const_cast<SequenceNet*>(this)->parameters()) n += t->size();
  return n;
}

void SequenceNet::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

void SequenceNet::save(std::ostream& out) const {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "layers " << layers_.size() << '\n';
  for (const auto& l : layers_) out << l->describe() << '\n';
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto tensors = layers_[i]->parameters();
    for (Tensor* b : layers_[i]->buffers()) tensors.push_back(b);
    for (const Tensor* t : tensors) {
      out << "tensor " << i << ' ' << t->name << ' ' << t->rows << ' ' << t->cols << '\n';
      for (std::size_t k = 0; k < t->values.size(); ++k) {
        if (k) out << ' ';
        out << format_number(t->values[k]);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

SequenceNet SequenceNet::load(std::istream& in) {
  const std::string src = "checkpoint";
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError(src, lineno + 1, "unexpected end of checkpoint");
    ++lineno;
    return std::string(trim(line));
  };

  {
    std::istringstream head(next());
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kCheckpointMagic) throw ParseError(src, lineno, "not a seqnet checkpoint");
    if (version != kCheckpointVersion) {
      throw ParseError(src, lineno, "unsupported checkpoint version " + std::to_string(version));
    }
  }
  std::size_t count = 0;
  {
    std::istringstream l(next());
    std::string key;
    l >> key >> count;
    if (key != "layers") throw ParseError(src, lineno, "expected 'layers <n>'");
  }
  SequenceNet net;
  for (std::size_t i = 0; i < count; ++i) {
    try {
      net.add(make_layer(next()));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(src, lineno, e.what());
    }
  }
  net.validate();
  for (std::size_t i = 0; i < count; ++i) {
    auto tensors = net.layers_[i]->parameters();
    for (Tensor* b : net.layers_[i]->buffers()) tensors.push_back(b);
    for (Tensor* t : tensors) {
      std::istringstream head(next());
      std::string key, name;
      std::size_t layer = 0, rows = 0, cols = 0;
      head >> key >> layer >> name >> rows >> cols;
      if (key != "tensor" || layer != i || name != t->name || rows != t->rows || cols != t->cols) {
        throw ParseError(src, lineno, "expected tensor " + std::to_string(i) + " " + t->name);
      }
      const std::string text = next();
      const auto values = split(text, ' ');
      if (t->values.empty() && values.size() == 1 && values[0].empty()) continue;
      if (values.size() != t->values.size()) throw ParseError(src, lineno, "wrong value count for " + t->name);
      for (std::size_t k = 0; k < values.size(); ++k) t->values[k] = parse_number<double>(values[k], src, lineno);
    }
  }
  if (next() != "end") throw ParseError(src, lineno, "missing 'end'");
  return net;
}

std::pair<Matrix, SequenceLayout> pack(const std::vector<const Matrix*>& sequences) {
  std::vector<std::size_t> lengths;
  long cols = 0;
  for (const Matrix* m : sequences) {
    if (!lengths.empty() && m->cols() != cols) throw Error("pack: sequences differ in feature width");
    cols = m->cols();
    lengths.push_back(static_cast<std::size_t>(m->rows()));
  }
  SequenceLayout layout = SequenceLayout::from_lengths(lengths);
  Matrix x(static_cast<long>(layout.total_rows()), cols);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    x.middleRows(static_cast<long>(layout.begin(i)), static_cast<long>(lengths[i])) = *sequences[i];
  }
  return {std::move(x), std::move(layout)};
}

}  // namespace hgr::seqnet
