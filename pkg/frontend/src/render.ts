import { ApiError, DrugSideEffects, QueryAnswer } from './api.js';
import { HistoryEntry } from './session.js';

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

const PIPELINE_NAMES: Record<string, string> = {
  rag_a: 'RAG (drug chunks)',
  rag_b: 'RAG (pair chunks)',
  graphrag: 'GraphRAG',
  baseline: 'No retrieval',
};

export function pipelineLabel(pipeline: string): string {
  return PIPELINE_NAMES[pipeline] ?? pipeline;
}

// The badge text is the API decision verbatim; the class only picks the color.
export function decisionBadge(decision: string): string {
  const cls = decision === 'YES' ? 'badge badge-yes' : 'badge badge-no';
  return `<span class="${cls}">${escapeHtml(decision)}</span>`;
}

function entityChips(answer: QueryAnswer): string {
  if (!answer.entities) {
    return '';
  }
  const { drug, side_effect } = answer.entities;
  return `
    <p class="entities">
      Recognized: <span class="chip chip-drug">${escapeHtml(drug.name)}</span>
      <span class="chip chip-se">${escapeHtml(side_effect.name)}</span>
    </p>`;
}

function evidenceBlock(answer: QueryAnswer): string {
  const evidence = answer.evidence ?? [];
  if (evidence.length === 0) {
    return '<p class="no-evidence">No supporting evidence retrieved.</p>';
  }
  const items = evidence.map((text) => `<li><code>${escapeHtml(text)}</code></li>`).join('');
  // Retrieved-chunk lists are long, so the rag pipelines start collapsed;
  // the single matched triple from graphrag is always worth showing.
  const open = answer.pipeline === 'graphrag' ? ' open' : '';
  return `
    <details class="evidence"${open}>
      <summary>Evidence (${evidence.length})</summary>
      <ul>${items}</ul>
    </details>`;
}

export function renderAnswerCard(answer: QueryAnswer, question: string): string {
  return `
    <article class="answer-card">
      <header>
        ${decisionBadge(answer.decision)}
        <span class="pipeline-tag">${escapeHtml(pipelineLabel(answer.pipeline))}</span>
        <span class="latency">${answer.latency_ms.toFixed(1)} ms</span>
      </header>
      <p class="asked">${escapeHtml(question)}</p>
      <p class="explanation">${escapeHtml(answer.explanation)}</p>
      ${entityChips(answer)}
      ${evidenceBlock(answer)}
    </article>`;
}

export function renderEntityError(err: ApiError): string {
  const hint =
    err.candidates.length > 0
      ? `<p>Did you mean: ${err.candidates
          .map((c) => `<span class="candidate">${escapeHtml(c)}</span>`)
          .join(', ')}?</p>`
      : '';
  return `
    <div class="form-error">
      <strong>${escapeHtml(err.code)}</strong>: ${escapeHtml(err.message)}
      ${hint}
    </div>`;
}

export function renderNetworkBanner(message: string): string {
  return `
    <div class="banner">
      <span>${escapeHtml(message)}</span>
      <button type="button" id="retry-btn">Retry</button>
    </div>`;
}

export function renderHistory(entries: HistoryEntry[]): string {
  if (entries.length === 0) {
    return '<p class="empty">No queries yet.</p>';
  }
  const items = entries
    .map(
      (e) => `
      <li>
        <time>${escapeHtml(e.at)}</time>
        ${decisionBadge(e.decision)}
        <span class="pipeline-tag">${escapeHtml(pipelineLabel(e.pipeline))}</span>
        <span class="asked">${escapeHtml(e.question)}</span>
        <span class="summary">${escapeHtml(e.evidence)}</span>
      </li>`
    )
    .join('');
  return `<ol class="history">${items}</ol>`;
}

export function renderUnknownDrug(name: string): string {
  return `
    <div class="drug-panel empty-state">
      <p>No drug named <strong>${escapeHtml(name)}</strong> in the knowledge base.</p>
    </div>`;
}

// Grouped by system organ class, headers sorted, rows filtered by substring.
// A null soc_class lands in the "unknown" bucket like everywhere else.
export function renderDrugPanel(body: DrugSideEffects, filter: string): string {
  const needle = filter.trim().toLowerCase();
  const groups = new Map<string, string[]>();
  for (const row of body.side_effects) {
    if (needle && !row.name.toLowerCase().includes(needle)) {
      continue;
    }
    const soc = row.soc_class ?? 'unknown';
    const list = groups.get(soc) ?? [];
    list.push(row.name);
    groups.set(soc, list);
  }
  const headers = Array.from(groups.keys()).sort();
  const sections = headers
    .map((soc) => {
      const rows = groups.get(soc) ?? [];
      const items = rows.map((name) => `<li>${escapeHtml(name)}</li>`).join('');
      return `
      <section class="soc-group">
        <h3>${escapeHtml(soc)} <span class="count">(${rows.length})</span></h3>
        <ul>${items}</ul>
      </section>`;
    })
    .join('');
  const shown = headers.reduce((n, soc) => n + (groups.get(soc) ?? []).length, 0);
  return `
    <div class="drug-panel">
      <h2>${escapeHtml(body.drug.name)}</h2>
      <p class="meta">ATC ${body.drug.atc_codes.map(escapeHtml).join(', ')} &middot;
        ${shown} of ${body.count} side effects shown</p>
      ${sections || '<p class="empty">No side effects match the filter.</p>'}
    </div>`;
}
