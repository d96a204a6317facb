#ifndef AFFECTBN_DRIVER_MODEL_HPP
#define AFFECTBN_DRIVER_MODEL_HPP

#include <cstdint>
#include <vector>

#include "affectbn/model.hpp"

namespace affectbn {

// The seven-node affective driver network: binary mental-load (ML) and
// active-fatigue (AF) roots regressing on Sex/Age/BMI, five Gaussian
// physiological nodes (SDD, MHR, RLH, SRT, MNB) each regressing on the three
// base covariates plus its parents. All coefficient priors are Normal(0, 25),
// all noise scales Uniform(0, 30).
ModelSpec bertha_preset();

// Frozen reference parameters for the preset, calibrated by forward
// simulation so the node means land near the documented ones (e.g. MHR near
// 73.94 bpm). Used as the default generator for synthetic data.
ParameterVector reference_theta();

// Synthetic covariate columns in schema order (Sex, Age, BMI):
// Sex ~ Bernoulli(9/17), Age ~ Uniform(24, 61), BMI ~ Uniform(17.65, 35.16).
std::vector<std::vector<double>> synth_covariates(std::size_t n,
                                                  std::uint64_t seed);

// Complete synthetic dataset for the preset: covariates from
// synth_covariates (stream 0 of seed), node values by per-row ancestral
// sampling (stream 1). Throws DomainError when params is inadmissible.
Dataset synth_dataset(const ParameterVector& params, std::size_t n,
                      std::uint64_t seed);

}  // namespace affectbn

#endif  // AFFECTBN_DRIVER_MODEL_HPP
