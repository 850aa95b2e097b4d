// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "ddsp/core.hpp"
#include "ddsp/rng.hpp"
#include "ddsp/dft.hpp"
#include "ddsp/types.hpp"
#include "ddsp/channel.hpp"
#include "ddsp/pilot.hpp"
#include "ddsp/chanest.hpp"
#include "ddsp/precoder.hpp"
#include "ddsp/link.hpp"
#include "ddsp/io.hpp"
#include "ddsp/harness/config.hpp"
#include "ddsp/harness/csv.hpp"
#include "ddsp/harness/experiment.hpp"
