#include "datk/eval.hpp"

#include <algorithm>

#include "datk/error.hpp"

namespace datk::eval {

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = logits.data() + r * c;
    out[r] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

namespace {

template <typename Perturb>
double accuracy_with(models::SmallConvNet& net, const data::Dataset& data, Bank bank,
                     Perturb&& perturb) {
  if (data.empty()) throw ContractError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, data.size() - begin);
    const data::Dataset batch = data.slice(begin, count);
    const Tensor inputs = perturb(batch);
    const auto pred = argmax_rows(net.logits(inputs, Mode::Eval, bank));
    for (std::size_t i = 0; i < count; ++i) correct += pred[i] == batch.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

double evaluate_accuracy(models::SmallConvNet& net, const data::Dataset& data,
                         const std::optional<attacks::AttackConfig>& attack, Bank bank,
                         std::mt19937_64& rng) {
  if (!attack) return accuracy_with(net, data, bank, [](const data::Dataset& b) { return b.images; });
  const auto model = attacks::eval_logits(net, bank);
  return accuracy_with(net, data, bank, [&](const data::Dataset& b) {
    return attacks::run_attack(b.images, b.labels, model, *attack, rng);
  });
}

double evaluate_fgsm_accuracy(models::SmallConvNet& net, const data::Dataset& data,
                              double epsilon, Bank bank) {
  const auto model = attacks::eval_logits(net, bank);
  return accuracy_with(net, data, bank, [&](const data::Dataset& b) {
    return attacks::fgsm(b.images, b.labels, model, epsilon);
  });
}

}  // namespace datk::eval
