#pragma once

// Umbrella header. The HTTP transport and the command line live in
// gateway_http.hpp and cli.hpp and are not pulled in here.

#include "mentra/checkpoint.hpp"
#include "mentra/config.hpp"
#include "mentra/dataset.hpp"
#include "mentra/error.hpp"
#include "mentra/eval.hpp"
#include "mentra/gateway.hpp"
#include "mentra/llm_roles.hpp"
#include "mentra/optimizer.hpp"
#include "mentra/policy.hpp"
#include "mentra/prompts.hpp"
#include "mentra/report.hpp"
#include "mentra/reward.hpp"
#include "mentra/rtg.hpp"
#include "mentra/schedule.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"
#include "mentra/toy_task.hpp"
#include "mentra/trainer.hpp"
#include "mentra/trajectory_format.hpp"
