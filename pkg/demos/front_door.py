"""
From plain language to an executed answer
=========================================

The front door takes a free-text query, decides whether it is one of the
supported fulfillment tasks, and — when it is — produces a small code
snippet that runs in a sandbox against the live planning state.  This
walkthrough uses the offline fixture backend, which routes by lexical
similarity against the bundled task templates, so everything here runs
without any model server.
"""

from fulfil.io import load_instance
from fulfil.router import FixtureBackend, HostContext, handle_query
from fulfil.templates import data_path

instance = load_instance(str(data_path("sample_instance")))
backend = FixtureBackend()
hosts = HostContext.for_instance(instance)

# --- a data question -------------------------------------------------------
# The gate picks the inventory-spread task, fills the S/T slots from the
# query, and the generated snippet queries the datastore.
answer = handle_query(
    "What is the standard deviation of supplier S1's inventory "
    "in the last 4 weeks?",
    backend,
    hosts,
)
print(f"kind:  {answer.kind}")
print(f"logs:  {answer.logs}")
print(f"snippet that produced it:\n{answer.snippet}\n")

# --- a plan mutation -------------------------------------------------------
# This one re-solves the model and commits a new plan version.
answer = handle_query("Dock demand D on its ideal dock date!", backend, hosts)
print(f"kind:  {answer.kind}")
print(f"logs:  {answer.logs}")
print(f"plan version now: {hosts.plan_store.current.version}\n")

# --- a what-if question ----------------------------------------------------
# Paraphrases of the same intent land on the same task.
answer = handle_query("why is my demand D3 not fulfilled?", backend, hosts)
print(f"kind:  {answer.kind}")
print(f"logs:  {answer.logs}\n")

# --- something out of scope ------------------------------------------------
# Off-topic queries never reach the sandbox; the caller gets standing
# guidance listing what the service can do, and the planning state is
# untouched.
answer = handle_query("what's a good movie to watch tonight?", backend, hosts)
print(f"kind:  {answer.kind}")
for line in answer.logs:
    print(f"  {line}")

# Every answer carries the token usage the backend reported, so callers
# can account for cost per query.
print(f"\nusage for that last query: {answer.usage.input_tokens} in, "
      f"{answer.usage.output_tokens} out")
