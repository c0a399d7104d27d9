"""MCP lab orchestrator.

Connects MCP tool servers (stdio or HTTP), turns their tool schemas into a
block toolbox, runs block workflows against them, and gates free-form agent
tool calls behind user approval. Ships two instrument servers: a simulated
color-mixing lab and a Bayesian-optimization decision service.
"""

__version__ = "0.1.0"
