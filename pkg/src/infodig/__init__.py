"""infodig: a multi-agent web research engine with a simulated-web test bench."""

__version__ = "0.1.0"

from .protocol import (  # noqa: F401
    AgentMessage,
    Memory,
    MessageBus,
    Step,
    StepBudget,
    SubTask,
    Task,
    ToolCall,
    ToolResult,
    Trajectory,
    append_step,
    new_task,
)
