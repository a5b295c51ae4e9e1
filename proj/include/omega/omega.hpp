// Copyright 2026 The Omega Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OMEGA__OMEGA_HPP_
#define OMEGA__OMEGA_HPP_

#include "omega/adversarial.hpp"
#include "omega/baselines.hpp"
#include "omega/config.hpp"
#include "omega/corridor.hpp"
#include "omega/diffusion.hpp"
#include "omega/geometry.hpp"
#include "omega/guidance.hpp"
#include "omega/metrics.hpp"
#include "omega/mlp.hpp"
#include "omega/routes.hpp"
#include "omega/scene.hpp"
#include "omega/scene_sampler.hpp"
#include "omega/solver.hpp"
#include "omega/svg.hpp"
#include "omega/toy.hpp"
#include "omega/toy_sampling.hpp"
#include "omega/two_phase.hpp"

#endif  // OMEGA__OMEGA_HPP_
