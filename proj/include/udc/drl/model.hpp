/*
 * Copyright 2026 The UDC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <vector>

#include "udc/drl/calibration.hpp"
#include "udc/drl/codebook.hpp"
#include "udc/drl/contrastive.hpp"
#include "udc/ehr/types.hpp"
#include "udc/numerics/archive.hpp"

namespace udc::drl {

enum class Branch { co, te };

/// Table 3 variants. Each flag is independent.
struct AblationFlags {
  bool nco = false;  // no condition-aware calibration
  bool nt = false;   // no task-aware contrastive terms
  bool nm = false;   // synthetic negatives only
  bool ns = false;   // in-batch negatives only
  bool ncd = false;  // plain EMA instead of co-teacher distillation

  /// "UDC" when no flag is set, otherwise e.g. "UDC-NCO" or "UDC-NM+NS".
  std::string name() const;
  /// Accepts "none", "NCO", "nt", "NM,NS", ...
  static AblationFlags parse(const std::string& s);
  bool operator==(const AblationFlags&) const = default;
};

struct DrlConfig {
  int levels = 4;
  int codes_per_level = 64;
  int dim = 128;
  /// Hidden width of the branch encoders/decoders; 0 means a single affine map.
  int hidden = 128;
  nn::Activation activation = nn::Activation::gelu;
  double alpha = 0.25;
  double kappa = 0.99;
  double eta = 0.2;
  double calibration_eps = 1e-5;
  int epochs = 50;
  double lr = 1e-3;
  double weight_decay = 0.01;
  int batch_size = 16;
  AblationFlags flags;
  bool include_positive_in_denominator = false;
  NormalizerMode ema_normalizer_mode = NormalizerMode::count;
  EmaTarget ema_target = EmaTarget::residual;
  /// In literal_z mode, use the calibrated z instead of the raw quantized sum.
  bool ema_post_calibration = false;
  ConditionEncoder condition_encoder = ConditionEncoder::mha;
  int heads = 4;
  bool dead_code_reset = true;
  double dead_code_threshold = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
  DistillConfig distill() const;
  ContrastiveFlags contrastive() const;
};

/// Frozen per-class entity tables of one branch.
struct EntityTables {
  nn::Matrix diagnosis;
  nn::Matrix procedure;
  nn::Matrix medication;

  const nn::Matrix& of(ehr::EntityClass c) const;
  nn::Index width() const { return diagnosis.cols(); }
};

/// Encoders, decoders, calibrators, the bilinear head and the shared codebook.
class DrlModel {
 public:
  DrlModel(const DrlConfig& cfg, nn::Index co_width, nn::Index text_width);

  /// r_0 rows for a block of entity vectors.
  Var encode(Graph& g, Branch b, const Var& x);
  Var decode(Graph& g, Branch b, const Var& z);
  nn::Matrix encode_values(Branch b, const nn::Matrix& x);

  nn::Mlp& encoder(Branch b) { return b == Branch::co ? phi_co_ : phi_te_; }
  nn::Mlp& decoder(Branch b) { return b == Branch::co ? psi_co_ : psi_te_; }
  ConditionCalibrator& calibrator(Branch b) { return b == Branch::co ? cal_co_ : cal_te_; }
  Parameter& contrastive_weight() { return w_; }

  /// Both branches quantize against this one object.
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }
  DistillState& distill_state() { return distill_; }
  const DistillState& distill_state() const { return distill_; }

  /// Gradient-trained parameters (the codebook is not among them).
  ParameterList parameters();

  long calibration_calls() const { return cal_co_.calls() + cal_te_.calls(); }
  const DrlConfig& config() const { return cfg_; }
  DrlConfig& config() { return cfg_; }
  nn::Index co_width() const { return co_width_; }
  nn::Index text_width() const { return text_width_; }

  void save(nn::TensorArchive& ar) const;
  void load(const nn::TensorArchive& ar);
  /// Checksum over every parameter, the codebook and the EMA state.
  std::uint64_t checksum() const;

 private:
  DrlConfig cfg_;
  nn::Index co_width_;
  nn::Index text_width_;
  nn::Mlp phi_co_, phi_te_, psi_co_, psi_te_;
  ConditionCalibrator cal_co_, cal_te_;
  Parameter w_;
  Codebook codebook_;
  DistillState distill_;
};

/// a*|r_co - sg z|^2 + a/2*|r_co - sg z~|^2 + a*|r_te - sg z~|^2 + a/2*|r_te - sg z|^2,
/// summed over rows.
Var commitment_loss(const Var& r_co, const Var& r_te, const Var& z, const Var& zt, double alpha);

/// One training example: a common disease at one of its visits.
struct DrlSample {
  int disease = 0;
  std::vector<int> procedures;
  std::vector<int> medications;
  /// Task targets S_d (next-visit diagnoses or same-visit medications); may be empty.
  std::vector<int> targets;
  /// Synthetic negative S'_d; empty iff targets is.
  std::vector<int> negatives;
};

struct LossBreakdown {
  double recon_co = 0, recon_te = 0;
  double con_intra_co = 0, con_inter_co = 0, con_intra_te = 0, con_inter_te = 0;
  double com = 0;
  double total = 0;

  double recon() const { return recon_co + recon_te; }
  double con() const { return con_intra_co + con_inter_co + con_intra_te + con_inter_te; }
  /// Sum of the parts in a fixed order; `total` is set from this.
  double sum_of_parts() const;
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

/// Quantization choices recorded by a forward pass. Passing it back in
/// replaces the straight-through step by z = r_0 + (z_q - r_0)|base with the
/// offset held constant, which is what a finite-difference check needs.
struct QuantizationPlan {
  std::vector<QuantizationResult> co, te;
  nn::Matrix co_offset, te_offset;
};

struct BatchForward {
  Var recon_co, recon_te;
  Var con_intra_co, con_inter_co, con_intra_te, con_inter_te;
  Var com;
  Var total;
  std::vector<EmaSample> ema;
  QuantizationPlan plan;
  /// Samples with a nonempty target set, as indices into the batch.
  std::vector<int> contrastive_rows;

  LossBreakdown breakdown() const;
};

BatchForward forward_batch(Graph& g, DrlModel& model, const std::vector<DrlSample>& batch,
                           const EntityTables& co, const EntityTables& text, ehr::Task task,
                           const QuantizationPlan* frozen = nullptr);

/// Per set, the sum of branch-encoded rows of `table`; one output row per set.
Var target_sums(Graph& g, DrlModel& model, Branch b, const nn::Matrix& table,
                const std::vector<const std::vector<int>*>& sets);

/// Stacked context rows of one visit for a branch.
nn::Matrix gather_table_rows(const nn::Matrix& table, const std::vector<int>& ids);

}  // namespace udc::drl
