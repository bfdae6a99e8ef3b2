"""One method per CLI subcommand; every artifact goes through ``cached_step``."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from analysis.charts import create_metric_bars, create_training_curves, write_chart
from analysis.report import build_report, report_json, report_text
from autodiff.layers import TransformerConfig
from backend.encoders import Backend
from backend.precomputed import EmbeddingTable, load_precomputed, save_precomputed
from backend.synthetic import SyntheticWorld
from backend.world import WorldConfig, generate_kvqae, split_questions
from config.loader import ConfigError, MissingInputError, PipelineConfig
from corpus.chunking import corpus_statistics, split_passages
from corpus.documents import (
    load_documents,
    load_pairs,
    load_passages,
    load_questions,
    read_jsonl,
    save_documents,
    save_pairs,
    save_passages,
    save_questions,
    write_jsonl,
)
from corpus.ict import IctConfig, make_corpus_ict_pairs
from corpus.splits import filter_corpus, split_by_article
from evaluation.answers import load_answer_keys, save_answer_keys
from evaluation.metrics import MetricReport, build_qrels, evaluate_run, read_qrels, write_qrels
from evaluation.runs import ScoredList, read_run, write_run
from evaluation.significance import describe, fisher_randomization, is_significant
from fusion.late import grid_search_alpha, late_fusion_scores
from fusion.models import BiEncoder, FusionConfig
from index.bm25 import bm25_search, bm25_tokenize, build_bm25_from_passages, load_bm25, save_bm25
from index.dense import DenseIndex, build_dense, load_dense, save_dense, search_dense_batch
from trainer.batches import build_ict_examples, build_qa_examples, index_passages
from trainer.negatives import bm25_retriever, mine_all
from trainer.stages import TrainLog, run_stage
from .artifacts import cached_step

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
QUESTION_SETS = ("visual", "text")
SEARCH_KINDS = ("dense", "bm25", "image")
ENCODE_BATCH = 64


def _dump(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


class Pipeline:
    """Artifact layout and the work behind each subcommand."""

    def __init__(self, config: PipelineConfig, threads: Optional[int] = None, force: bool = False, progress: bool = True):
        self.config = config
        self.threads = max(1, threads or os.cpu_count() or 1)
        self.force = force
        self.progress = progress
        self._backend: Optional[Backend] = None

    # ===== Layout =====

    def path(self, kind: str, *parts: str) -> Path:
        return self.config.paths.resolve(kind, *parts)

    @property
    def documents_path(self) -> Path:
        return self.path("corpus", "documents.jsonl")

    @property
    def answer_keys_path(self) -> Path:
        return self.path("corpus", "answer_keys.jsonl")

    @property
    def filtered_path(self) -> Path:
        return self.path("corpus", "filtered.jsonl")

    @property
    def passages_path(self) -> Path:
        return self.path("corpus", "passages.jsonl")

    def questions_path(self, question_set: str, split: Optional[str] = None) -> Path:
        if question_set not in QUESTION_SETS:
            raise ConfigError(f"question set must be one of {QUESTION_SETS}, got {question_set!r}")
        name = "questions" if question_set == "visual" else "text_questions"
        return self.path("corpus", f"{name}.jsonl" if split is None else f"{name}_{split}.jsonl")

    def documents_split_path(self, split: str) -> Path:
        return self.path("corpus", f"documents_{split}.jsonl")

    def qrels_path(self, question_set: str, split: str) -> Path:
        return self.path("qrels", f"{question_set}_{split}.txt")

    def pairs_path(self, split: str) -> Path:
        return self.path("pairs", f"{split}.jsonl")

    def negatives_path(self, question_set: str, split: str) -> Path:
        return self.path("pairs", f"negatives_{question_set}_{split}.jsonl")

    def model_path(self, name: str) -> Path:
        return self.path("models", f"{name}.npz")

    def train_log_path(self, name: str) -> Path:
        return self.path("models", f"{name}.log.jsonl")

    def embeddings_path(self, name: str) -> Path:
        return self.path("embeddings", f"{name}.jsonl")

    def dense_index_path(self, name: str) -> Path:
        return self.path("indices", f"{name}.npz")

    @property
    def bm25_path(self) -> Path:
        return self.path("indices", "bm25.jsonl")

    def run_path(self, name: str) -> Path:
        return self.path("runs", f"{name}.trec")

    def report_path(self, name: str, suffix: str) -> Path:
        return self.path("reports", f"{name}{suffix}")

    def _step(self, command, inputs, outputs, produce, params=None) -> Dict[str, Any]:
        return cached_step(
            command, self.config.config_hash(), inputs, outputs, produce, params=params, force=self.force,
        )

    # ===== Shared objects =====

    def world(self) -> SyntheticWorld:
        b = self.config.backend
        return SyntheticWorld(
            entity_count=b.entity_count,
            latent_dim=b.latent_dim,
            text_dim=self.config.model.model_dim,
            image_dim=b.image_dim,
            noise_sigma=b.noise_sigma,
            seed=self.config.seed,
        )

    def backend(self) -> Backend:
        if self._backend is None:
            table = None
            if self.config.backend.kind == "precomputed":
                path = Path(self.config.backend.image_table)
                if not path.exists():
                    raise MissingInputError(f"backend.image_table {path} does not exist")
                table = load_precomputed(path)
            self._backend = Backend(self.world(), table)
        return self._backend

    def _backend_inputs(self) -> List[Path]:
        if self.config.backend.kind == "precomputed":
            return [Path(self.config.backend.image_table)]
        return []

    def fusion_config(self, kind: str) -> FusionConfig:
        m = self.config.model
        transformer = TransformerConfig(
            layers=m.layers, model_dim=m.model_dim, heads=m.heads, ffn_dim=m.ffn_dim,
            dropout_prob=m.dropout_prob, max_seq=m.max_seq,
        )
        return FusionConfig(kind=kind, transformer=transformer, text_dim=m.model_dim, image_dim=self.config.backend.image_dim)

    # ===== Corpus =====

    def synth(self) -> Dict[str, Any]:
        """Generate a synthetic knowledge base with visual and text-only questions."""
        outputs = [self.documents_path, self.questions_path("visual"), self.questions_path("text"), self.answer_keys_path]

        def produce():
            w = self.config.world
            cfg = WorldConfig(
                relations=w.relations, paragraphs=w.paragraphs, sentences_per_paragraph=w.sentences_per_paragraph,
                filler_words=tuple(w.filler_words), image_only_share=w.image_only_share,
                alias_share=w.alias_share, seed=self.config.seed,
            )
            kvqae = generate_kvqae(self.world(), cfg)
            save_documents(outputs[0], kvqae.documents)
            save_questions(outputs[1], kvqae.questions)
            save_questions(outputs[2], kvqae.text_questions)
            save_answer_keys(outputs[3], kvqae.answer_keys.values())
            return {
                "documents": len(kvqae.documents),
                "visual_questions": len(kvqae.questions),
                "image_only_questions": sum(kvqae.image_only.values()),
                "text_questions": len(kvqae.text_questions),
            }

        return self._step("synth", [], outputs, produce)

    def build_corpus(self) -> Dict[str, Any]:
        """Filter the raw documents and chunk them into the passage knowledge base."""
        outputs = [self.passages_path, self.filtered_path]

        def produce():
            c = self.config.corpus
            kept, report = filter_corpus(load_documents(self.documents_path), c.min_sentences)
            save_documents(self.filtered_path, kept)
            passages = [p for doc in kept for p in split_passages(doc, c.passage_max_words)]
            save_passages(self.passages_path, passages)
            return {"dropped": report.to_dict(), "statistics": corpus_statistics(kept, c.passage_max_words)}

        return self._step("build-corpus", [self.documents_path], outputs, produce)

    def split(self) -> Dict[str, Any]:
        """Article-disjoint document splits, question splits and per-split qrels."""
        c = self.config.corpus
        sets = [s for s in QUESTION_SETS if self.questions_path(s).exists()]
        inputs = [self.filtered_path, self.passages_path]
        if sets:
            inputs += [self.answer_keys_path] + [self.questions_path(s) for s in sets]
        outputs = [self.documents_split_path(s) for s in SPLITS]
        outputs += [self.questions_path(q, s) for q in sets for s in SPLITS]
        outputs += [self.qrels_path(q, s) for q in sets for s in SPLITS]

        def produce():
            parts = split_by_article(load_documents(self.filtered_path), c.split_ratios, self.config.seed)
            summary = {"documents": {s: len(d) for s, d in zip(SPLITS, parts)}}
            for s, docs in zip(SPLITS, parts):
                save_documents(self.documents_split_path(s), docs)
            if not sets:
                return summary
            passages = load_passages(self.passages_path)
            keys = load_answer_keys(self.answer_keys_path)
            use_aliases = self.config.eval.use_aliases
            for question_set in sets:
                split_parts = split_questions(
                    load_questions(self.questions_path(question_set)), c.question_split_ratios, self.config.seed,
                )
                counts = {}
                for s, questions in zip(SPLITS, split_parts):
                    save_questions(self.questions_path(question_set, s), questions)
                    missing = [q.question_id for q in questions if q.question_id not in keys]
                    if missing:
                        raise ConfigError(f"question {missing[0]!r} has no answer key")
                    qrels = build_qrels(passages, [keys[q.question_id] for q in questions], use_aliases)
                    write_qrels(self.qrels_path(question_set, s), qrels)
                    counts[s] = len(questions)
                summary[f"{question_set}_questions"] = counts
            return summary

        return self._step("split", inputs, outputs, produce)

    def ict_pairs(self) -> Dict[str, Any]:
        """Multimodal ICT pairs for every article split."""
        inputs = [self.documents_split_path(s) for s in SPLITS]
        outputs = [self.pairs_path(s) for s in SPLITS]

        def produce():
            c = self.config.corpus
            cfg = IctConfig(leave_in_prob=c.leave_in_prob, context_sentences=c.context_sentences, min_sentences=c.min_sentences)
            summary = {}
            for s in SPLITS:
                pairs, report = make_corpus_ict_pairs(load_documents(self.documents_split_path(s)), cfg, self.config.seed)
                save_pairs(self.pairs_path(s), pairs)
                summary[s] = dict(sorted(report.items()))
            return summary

        return self._step("ict-pairs", inputs, outputs, produce)

    # ===== Training =====

    def _qa_examples(self, question_set: str, split: str, negatives_per_question: int):
        passages = index_passages(load_passages(self.passages_path))
        negatives = None
        negatives_file = self.negatives_path(question_set, split)
        if negatives_per_question and negatives_file.exists():
            negatives = {r["question_id"]: r["negatives"] for r in read_jsonl(negatives_file)}
        return build_qa_examples(
            load_questions(self.questions_path(question_set, split)),
            read_qrels(self.qrels_path(question_set, split)),
            passages,
            self.backend(),
            negatives=negatives,
            max_negatives=negatives_per_question,
        )

    def _train_inputs(self, stage: int, init: Optional[Path]) -> List[Path]:
        if stage == 2:
            inputs = [self.pairs_path("train"), self.pairs_path("validation")]
        else:
            question_set = "text" if stage == 1 else "visual"
            inputs = [self.passages_path]
            for s in ("train", "validation"):
                inputs += [self.questions_path(question_set, s), self.qrels_path(question_set, s)]
            if self.config.negatives.per_question and self.negatives_path(question_set, "train").exists():
                inputs.append(self.negatives_path(question_set, "train"))
        if init is not None:
            inputs.append(init)
        return inputs + self._backend_inputs()

    def train(self, stage: int, kind: str, init: Optional[str] = None, name: Optional[str] = None,
              max_steps: Optional[int] = None) -> Dict[str, Any]:
        """Run one training stage and keep the best validated checkpoint."""
        if stage not in (1, 2, 3):
            raise ConfigError(f"stage must be 1, 2 or 3, got {stage}")
        overrides = {"progress": self.progress}
        if max_steps is not None:
            overrides["max_steps"] = max_steps
        plan = self.config.stage_plan(stage, kind, **overrides)
        name = name or f"stage{stage}-{kind}"
        init_path = Path(init) if init else None
        outputs = [self.model_path(name), self.train_log_path(name)]
        params = {"stage": stage, "kind": kind, "plan": {k: v for k, v in plan.to_dict().items() if k != "progress"}}

        def produce():
            model = BiEncoder(self.fusion_config(kind), seed=self.config.seed)
            if init_path is not None:
                source = BiEncoder.load(init_path)
                if source.kind == kind and stage == 3:
                    model.load_state_dict(source.state_dict())
                else:
                    model.initialize_from(source)
            if stage == 2:
                backend = self.backend()
                data = build_ict_examples(load_pairs(self.pairs_path("train")), backend)
                eval_set = build_ict_examples(load_pairs(self.pairs_path("validation")), backend)
            else:
                question_set = "text" if stage == 1 else "visual"
                data = self._qa_examples(question_set, "train", self.config.negatives.per_question)
                eval_set = self._qa_examples(question_set, "validation", 0)
            result = run_stage(plan, data, model, eval_set)
            extra = {"stage": stage, "best_mrr": result.best_mrr, "best_step": result.best_step}
            result.model.save(outputs[0], optimizer=result.optimizer.state if result.optimizer else None, extra=extra)
            result.log.write(outputs[1])
            return {"train_examples": len(data), "validation_examples": len(eval_set), **extra}

        return self._step("train", self._train_inputs(stage, init_path), outputs, produce, params)

    # ===== Embedding and indexing =====

    def embed(self, model: Optional[str] = None, name: Optional[str] = None, modality: str = "passage") -> Dict[str, Any]:
        """Passage vectors from a trained passage tower, or the passages' raw image vectors."""
        if modality not in ("passage", "image"):
            raise ConfigError(f"modality must be 'passage' or 'image', got {modality!r}")
        if modality == "passage" and not model:
            raise ConfigError("embed needs --model for passage embeddings")
        name = name or ("image" if modality == "image" else Path(model).stem)
        inputs = [self.passages_path] + ([Path(model)] if modality == "passage" else []) + self._backend_inputs()
        output = self.embeddings_path(name)

        def produce():
            passages = load_passages(self.passages_path)
            backend = self.backend()
            if modality == "image":
                vectors = [e.vector for e in backend.encode_image_batch([p.image for p in passages], self.threads)]
            else:
                encoder = BiEncoder.load(model)
                vectors = []
                for start in range(0, len(passages), ENCODE_BATCH):
                    chunk = passages[start:start + ENCODE_BATCH]
                    texts = backend.encode_text_batch([p.text for p in chunk], self.threads)
                    images = backend.encode_image_batch([p.image for p in chunk], self.threads)
                    vectors.extend(encoder.encode_passages(texts, images).data)
            table = EmbeddingTable.from_pairs(zip((p.passage_id for p in passages), vectors))
            save_precomputed(output, table)
            return {"passages": len(table), "dim": table.dim if len(table) else 0}

        return self._step("embed", inputs, [output], produce, {"modality": modality})

    def index(self, kind: str, embeddings: Optional[str] = None, name: Optional[str] = None) -> Dict[str, Any]:
        """BM25 over the passage texts, or an exact dense index over an embedding file."""
        if kind == "bm25":
            e = self.config.eval

            def produce_bm25():
                index = build_bm25_from_passages(load_passages(self.passages_path), e.bm25_k1, e.bm25_b)
                save_bm25(self.bm25_path, index)
                return {"documents": index.doc_count, "terms": len(index.postings)}

            return self._step("index", [self.passages_path], [self.bm25_path], produce_bm25, {"kind": kind})
        if kind != "dense":
            raise ConfigError(f"index kind must be 'dense' or 'bm25', got {kind!r}")
        if not embeddings:
            raise ConfigError("dense index needs --embeddings")
        source = Path(embeddings)
        output = self.dense_index_path(name or source.stem)

        def produce_dense():
            index = build_dense(load_precomputed(source))
            save_dense(output, index)
            return {"passages": len(index), "dim": index.dim}

        return self._step("index", [source], [output], produce_dense, {"kind": kind})

    # ===== Retrieval =====

    def _encode_questions(self, questions, model: BiEncoder) -> np.ndarray:
        backend = self.backend()
        rows = []
        for start in range(0, len(questions), ENCODE_BATCH):
            chunk = questions[start:start + ENCODE_BATCH]
            texts = backend.encode_text_batch([q.text for q in chunk], self.threads)
            images = backend.encode_image_batch([q.image for q in chunk], self.threads)
            rows.append(model.encode_questions(texts, images).data)
        return np.vstack(rows) if rows else np.zeros((0, model.config.text_dim))

    def search(self, kind: str, question_set: str, split: str, model: Optional[str] = None,
               index: Optional[str] = None, name: Optional[str] = None) -> Dict[str, Any]:
        """Top-K runs for a question split from a dense, BM25 or image index."""
        if kind not in SEARCH_KINDS:
            raise ConfigError(f"search kind must be one of {SEARCH_KINDS}, got {kind!r}")
        if split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}, got {split!r}")
        k = self.config.eval.search_k
        questions_file = self.questions_path(question_set, split)
        inputs = [questions_file]
        if kind == "bm25":
            inputs.append(self.bm25_path)
            default_name = "bm25"
        else:
            if not index:
                raise ConfigError(f"{kind} search needs --index")
            if kind == "dense" and not model:
                raise ConfigError("dense search needs --model")
            inputs += [Path(index)] + ([Path(model)] if kind == "dense" else []) + self._backend_inputs()
            default_name = Path(model).stem if kind == "dense" else "image"
        name = name or f"{default_name}_{question_set}_{split}"
        output = self.run_path(name)

        def produce():
            questions = load_questions(questions_file)
            qids = [q.question_id for q in questions]
            if kind == "bm25":
                bm25 = load_bm25(self.bm25_path)
                run = [bm25_search(bm25, bm25_tokenize(q.text), k, q.question_id) for q in questions]
            elif kind == "dense":
                dense = load_dense(index)
                run = search_dense_batch(dense, self._encode_questions(questions, BiEncoder.load(model)), k, qids, self.threads)
            else:
                dense = load_dense(index)
                if len(dense) == 0:
                    write_run(output, [ScoredList(qid) for qid in qids], tag=name)
                    return {"questions": len(qids), "k": k}
                vectors = np.array([e.vector for e in self.backend().encode_image_batch([q.image for q in questions], self.threads)])
                run = search_dense_batch(_unit_index(dense), _unit_rows(vectors, dense.dim), k, qids, self.threads)
            write_run(output, run, tag=name)
            return {"questions": len(run), "k": k}

        return self._step("search", inputs, [output], produce, {"kind": kind, "k": k})

    def fuse(self, text_run: str, image_run: str, name: str, alpha: Optional[float] = None,
             validation: Optional[Tuple[str, str, str]] = None) -> Dict[str, Any]:
        """Late fusion of two runs; without ``alpha`` it is grid-searched on the ``validation`` runs and qrels."""
        if alpha is None and validation is None:
            raise ConfigError("fuse needs --alpha or validation runs and qrels to search it")
        inputs = [Path(text_run), Path(image_run)] + ([Path(p) for p in validation] if alpha is None else [])
        output = self.run_path(name)
        k = self.config.eval.search_k

        def produce():
            chosen = alpha
            if chosen is None:
                val_text, val_image = read_run(validation[0]), read_run(validation[1])
                pairs = _paired(val_text, val_image)
                chosen = grid_search_alpha(pairs, read_qrels(validation[2]), self.config.eval.alpha_grid_step, k=self.config.eval.mrr_k)
            pairs = _paired(read_run(text_run), read_run(image_run))
            fused = [late_fusion_scores(t, v, chosen, k=k) for _, (t, v) in sorted(pairs.items())]
            write_run(output, fused, tag=name)
            constant = sum(1 for r in fused if r.flags)
            if constant:
                logger.warning("%d questions had a zero-variance modality", constant)
            return {"alpha": float(chosen), "questions": len(fused), "constant_inputs": constant}

        return self._step("fuse", inputs, [output], produce, {"alpha": alpha, "k": k})

    def mine_negatives(self, question_set: str, split: str, run: Optional[str] = None) -> Dict[str, Any]:
        """Top BM25 (or ``run``) passages lacking every answer string."""
        inputs = [self.questions_path(question_set, split), self.answer_keys_path, self.passages_path]
        inputs.append(Path(run) if run else self.bm25_path)
        output = self.negatives_path(question_set, split)
        n = self.config.negatives

        def produce():
            passages = index_passages(load_passages(self.passages_path))
            if run:
                ranked = read_run(run)

                def retriever(question):
                    return ranked.get(question.question_id, ScoredList(question.question_id))
            else:
                retriever = bm25_retriever(load_bm25(self.bm25_path), n.depth)
            mined = mine_all(
                load_questions(self.questions_path(question_set, split)),
                load_answer_keys(self.answer_keys_path),
                retriever, max(n.per_question, 1), passages, self.threads,
            )
            write_jsonl(output, ({"question_id": qid, "negatives": ids} for qid, ids in sorted(mined.items())))
            return {"questions": len(mined), "without_negatives": sum(1 for ids in mined.values() if not ids)}

        params = {"depth": n.depth, "per_question": n.per_question, "source": "run" if run else "bm25"}
        return self._step("mine-negatives", inputs, [output], produce, params)

    # ===== Evaluation =====

    def _report(self, run: str, qrels: str, name: str, predictions: Optional[str] = None) -> MetricReport:
        preds = keys = None
        if predictions:
            preds = {r["question_id"]: r["prediction"] for r in read_jsonl(predictions)}
            keys = load_answer_keys(self.answer_keys_path)
        config = {"config_hash": self.config.config_hash(), "run": Path(run).name, "qrels": Path(qrels).name}
        return evaluate_run(
            read_run(run), read_qrels(qrels), self.config.eval.metric_ks(),
            predictions=preds, answer_keys=keys, config=config, name=name,
        )

    def evaluate(self, run: str, qrels: str, name: Optional[str] = None, predictions: Optional[str] = None) -> Dict[str, Any]:
        """Metric report (JSON and aligned table) for one run."""
        name = name or Path(run).stem
        inputs = [Path(run), Path(qrels)] + ([Path(predictions), self.answer_keys_path] if predictions else [])
        outputs = [self.report_path(name, ".json"), self.report_path(name, ".txt")]

        def produce():
            report = self._report(run, qrels, name, predictions)
            _dump(outputs[0], report.to_json() + "\n")
            _dump(outputs[1], report.to_table())
            return {"metrics": {m: round(100.0 * v, 1) for m, v in report.values.items()}}

        return self._step("evaluate", inputs, outputs, produce)

    def significance(self, run_a: str, run_b: str, qrels: str, metric: Optional[str] = None,
                     name: Optional[str] = None) -> Dict[str, Any]:
        """Paired randomization test between two runs on one metric."""
        e = self.config.eval
        metric = metric or f"MRR@{e.mrr_k}"
        name = name or f"{Path(run_a).stem}_vs_{Path(run_b).stem}"
        output = self.report_path(name, ".significance.json")

        def produce():
            a = self._report(run_a, qrels, "a")
            b = self._report(run_b, qrels, "b")
            if metric not in a.values:
                raise ConfigError(f"unknown metric {metric!r}; expected one of {sorted(a.values)}")
            p = fisher_randomization(a.scores(metric).to_numpy(), b.scores(metric).to_numpy(), e.fisher_iterations, self.config.seed)
            result = {
                "metric": metric,
                "mean_a": a.values[metric],
                "mean_b": b.values[metric],
                "p_value": p,
                "significant": is_significant(p, e.significance_level),
                "description": describe(p, e.significance_level),
                "config_hash": self.config.config_hash(),
            }
            _dump(output, json.dumps(result, sort_keys=True, indent=2) + "\n")
            return result

        return self._step("significance", [Path(run_a), Path(run_b), Path(qrels)], [output], produce, {"metric": metric})

    def report(self, runs: Mapping[str, str], qrels: str, name: str = "report",
               predictions: Optional[Mapping[str, str]] = None, logs: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
        """Comparison tables over labelled runs, plus charts."""
        if not runs:
            raise ConfigError("report needs at least one labelled run")
        predictions = dict(predictions or {})
        logs = dict(logs or {})
        inputs = [Path(p) for p in runs.values()] + [Path(qrels)]
        inputs += [Path(p) for p in predictions.values()] + [Path(p) for p in logs.values()]
        if predictions:
            inputs.append(self.answer_keys_path)
        outputs = [self.report_path(name, ".json"), self.report_path(name, ".txt"), self.report_path(name, ".metrics.html")]
        if logs:
            outputs.append(self.report_path(name, ".training.html"))
        e = self.config.eval

        def produce():
            reports = {
                label: self._report(path, qrels, label, predictions.get(label))
                for label, path in runs.items()
            }
            tables = build_report(reports, e.metric_ks(), e.fisher_iterations, self.config.seed,
                                  e.significance_level, self.config.config_hash())
            _dump(outputs[0], report_json(tables))
            _dump(outputs[1], report_text(tables))
            write_chart(create_metric_bars(tables["retrieval"]), outputs[2], f"{name}-metrics")
            if logs:
                curves = create_training_curves({label: TrainLog.read(p) for label, p in logs.items()})
                write_chart(curves, outputs[3], f"{name}-training")
            return {"models": list(runs), "table": report_text(tables)}

        params = {"labels": list(runs), "predictions": sorted(predictions), "logs": sorted(logs)}
        return self._step("report", inputs, outputs, produce, params)


def _paired(text: Mapping[str, ScoredList], image: Mapping[str, ScoredList]) -> Dict[str, Tuple[ScoredList, ScoredList]]:
    qids = sorted(set(text) | set(image))
    return {q: (text.get(q, ScoredList(q)), image.get(q, ScoredList(q))) for q in qids}


def _unit_rows(vectors: np.ndarray, dim: int) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64).reshape(-1, dim)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def _unit_index(index: DenseIndex) -> DenseIndex:
    """Row-normalised copy, so inner products are cosines."""
    matrix = _unit_rows(index.matrix, index.dim)
    matrix.setflags(write=False)
    return DenseIndex(dim=index.dim, ids=index.ids, matrix=matrix)
