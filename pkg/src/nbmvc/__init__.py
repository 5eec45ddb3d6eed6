"""nbmvc: a model-driven workbench for visual device, macro and task editors.

The public surface, layer by layer: the annotated model tree (`aslt`), the
transactional processor engine (`processors`), domain profiles and validation
(`domains`), the headless scene (`scene`), the event-cycle engine (`engine`),
code generation and evaluation (`codegen`), and the session service
(`service`).
"""

from .aslt import (
    AsltNode,
    AsltTree,
    ChangeEvent,
    ChangeKind,
    create_tree,
    inverse_of,
    trees_equal,
)
from .codegen import (
    CodeArtifact,
    TaskProgram,
    compile_task,
    evaluate_task,
    generate_application,
    generate_component_code,
)
from .domains import (
    ComponentCatalog,
    Diagnostic,
    DomainProfile,
    PaletteEntry,
    WizardSpec,
    catalog_from_trees,
    derive_extended_element,
    load_profile,
    validate_model,
)
from .engine import (
    CycleTrace,
    ModelEvent,
    ModelEventKind,
    RawEvent,
    RawKind,
    RawSource,
    Session,
)
from .processors import (
    AtomicInstruction,
    AtomicOp,
    DomainProcessor,
    ProcessorRegistry,
    UndoStack,
    apply_atomic,
    apply_processor,
    resolve_processor,
    run_transaction,
)
from .scene import (
    Binding,
    Filter,
    Scene,
    Symbol,
    ViewPatch,
    apply_patch,
    construct_scene,
    diff_scenes,
    layout,
    scene_hash,
)
from .service import ProjectStore, SessionManager, create_app

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
