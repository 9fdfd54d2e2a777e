from .base import AgentError, AgentRequest, Critic, Policy, extract_code, generate_candidates
from .prompts import (
    PromptContext,
    PromptContextError,
    PromptVariant,
    prompt_hash,
    render_critic_prompt,
    render_generator_prompt,
    render_reward_prompt,
    split_prompt,
)
from .remote import ChatClient, RemoteAgent, RemoteCritic
from .scripted import ScriptedCritic, ScriptedPolicy, scripted_policy_step

__all__ = [
    "AgentError",
    "AgentRequest",
    "ChatClient",
    "Critic",
    "Policy",
    "PromptContext",
    "PromptContextError",
    "PromptVariant",
    "RemoteAgent",
    "RemoteCritic",
    "ScriptedCritic",
    "ScriptedPolicy",
    "extract_code",
    "generate_candidates",
    "prompt_hash",
    "render_critic_prompt",
    "render_generator_prompt",
    "render_reward_prompt",
    "scripted_policy_step",
    "split_prompt",
]
