/*
 Copyright 2026 flexmpc contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include "flexmpc/common.hpp"
#include "flexmpc/config.hpp"
#include "flexmpc/experiment.hpp"
#include "flexmpc/lyapunov.hpp"
#include "flexmpc/model.hpp"
#include "flexmpc/mpc.hpp"
#include "flexmpc/nlp.hpp"
#include "flexmpc/ocp.hpp"
#include "flexmpc/svg.hpp"
#include "flexmpc/trace_io.hpp"
