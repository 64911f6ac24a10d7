"""Emergency triage gateway and evaluation harness."""

from .client import BackendConfig, BackendReply, classify_text, parse_label, send_chat
from .dataset import (
    DatasetRound,
    SplitSpec,
    check_balance,
    deduplicate,
    ingest_candidates,
    load_phrases,
    rejection_rate,
    save_phrases,
    split_dataset,
)
from .evaluate import (
    EvalConfig,
    SweepConfig,
    check_consistency,
    render_report,
    render_sweep,
    run_eval,
    run_sweep,
)
from .gateway import (
    AggregateCounters,
    Gateway,
    GatewayConfig,
    GatewayServer,
    record_aggregate,
    run_gateway,
)
from .mock import ErrorProfile, MockBackendServer, mock_reply, run_mock_server
from .model import (
    ClassMetrics,
    ConfusionMatrix,
    EvalReport,
    Label,
    LabeledPhrase,
    LatencyStats,
    accuracy_of,
    class_metrics,
    confusion_from_pairs,
    latency_stats,
)
from .prompting import (
    ChatMessage,
    ExampleBank,
    PromptSpec,
    build_messages,
    render_system_prompt,
    select_examples,
)

__version__ = "0.1.0"
