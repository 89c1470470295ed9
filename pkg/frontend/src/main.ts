import { ApiError, Client, DrugSideEffects, QueryAnswer } from './api.js';
import {
  renderAnswerCard,
  renderDrugPanel,
  renderEntityError,
  renderHistory,
  renderNetworkBanner,
  renderUnknownDrug,
} from './render.js';
import { QuerySession } from './session.js';

const SHELL = `
  <header class="masthead">
    <h1>Drug side-effect console</h1>
    <p class="sub">Ask a yes/no association question, or browse a drug's known effects.</p>
  </header>
  <main class="layout">
    <div class="left">
      <section class="ask">
        <label for="question">Question</label>
        <textarea id="question" rows="2"
          placeholder="Is headache an adverse effect of metformin?"></textarea>
        <div class="controls">
          <label for="pipeline">Pipeline</label>
          <select id="pipeline">
            <option value="rag_a">rag_a</option>
            <option value="rag_b">rag_b</option>
            <option value="graphrag" selected>graphrag</option>
            <option value="baseline">baseline</option>
          </select>
          <button id="submit" disabled>Ask</button>
        </div>
        <div id="form-error"></div>
        <div id="banner"></div>
      </section>
      <section id="answer"></section>
      <section class="history-wrap">
        <h2>History</h2>
        <div id="history"><p class="empty">No queries yet.</p></div>
      </section>
    </div>
    <aside class="browse">
      <h2>Browse a drug</h2>
      <div class="controls">
        <input id="drug-name" placeholder="aspirin" />
        <button id="browse" disabled>Look up</button>
      </div>
      <input id="se-filter" placeholder="filter side effects" />
      <div id="drug-panel"></div>
    </aside>
  </main>`;

function summarize(answer: QueryAnswer): string {
  const evidence = answer.evidence ?? [];
  if (evidence.length === 0) {
    return 'no evidence';
  }
  if (answer.pipeline === 'graphrag') {
    return evidence[0];
  }
  return `${evidence.length} retrieved chunks`;
}

export function initApp(root: HTMLElement, client: Client): void {
  root.innerHTML = SHELL;
  const questionEl = root.querySelector('#question') as HTMLTextAreaElement;
  const pipelineEl = root.querySelector('#pipeline') as HTMLSelectElement;
  const submitEl = root.querySelector('#submit') as HTMLButtonElement;
  const formErrorEl = root.querySelector('#form-error') as HTMLElement;
  const bannerEl = root.querySelector('#banner') as HTMLElement;
  const answerEl = root.querySelector('#answer') as HTMLElement;
  const historyEl = root.querySelector('#history') as HTMLElement;
  const drugNameEl = root.querySelector('#drug-name') as HTMLInputElement;
  const browseEl = root.querySelector('#browse') as HTMLButtonElement;
  const filterEl = root.querySelector('#se-filter') as HTMLInputElement;
  const drugPanelEl = root.querySelector('#drug-panel') as HTMLElement;

  // markup alone is not enough for every DOM implementation, so pin the
  // default pipeline here too
  pipelineEl.value = 'graphrag';

  const session = new QuerySession();
  // one in-flight request at a time; both buttons share the gate
  let pending = false;
  let lastDrug: DrugSideEffects | null = null;

  function updateControls(): void {
    submitEl.disabled = pending || questionEl.value.trim() === '';
    browseEl.disabled = pending || drugNameEl.value.trim() === '';
  }

  function showBanner(message: string, retry: () => void): void {
    bannerEl.innerHTML = renderNetworkBanner(message);
    const btn = bannerEl.querySelector('#retry-btn') as HTMLButtonElement | null;
    btn?.addEventListener('click', () => {
      bannerEl.innerHTML = '';
      retry();
    });
  }

  async function runQuery(): Promise<void> {
    const question = questionEl.value.trim();
    if (!question || pending) {
      return;
    }
    pending = true;
    updateControls();
    formErrorEl.innerHTML = '';
    bannerEl.innerHTML = '';
    try {
      const answer = await client.query(question, pipelineEl.value);
      answerEl.innerHTML = renderAnswerCard(answer, question);
      session.add({
        question,
        pipeline: answer.pipeline,
        decision: answer.decision,
        evidence: summarize(answer),
        at: new Date().toISOString(),
      });
      historyEl.innerHTML = renderHistory(session.entries());
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        formErrorEl.innerHTML = renderEntityError(err);
      } else if (err instanceof ApiError && err.retriable) {
        showBanner(err.message, () => void runQuery());
      } else {
        formErrorEl.textContent = err instanceof Error ? err.message : String(err);
      }
    } finally {
      pending = false;
      updateControls();
    }
  }

  async function browse(): Promise<void> {
    const name = drugNameEl.value.trim();
    if (!name || pending) {
      return;
    }
    pending = true;
    updateControls();
    try {
      lastDrug = await client.sideEffects(name);
      drugPanelEl.innerHTML = renderDrugPanel(lastDrug, filterEl.value);
    } catch (err) {
      lastDrug = null;
      if (err instanceof ApiError && err.status === 404) {
        drugPanelEl.innerHTML = renderUnknownDrug(name);
      } else if (err instanceof ApiError && err.retriable) {
        showBanner(err.message, () => void browse());
      } else {
        drugPanelEl.textContent = err instanceof Error ? err.message : String(err);
      }
    } finally {
      pending = false;
      updateControls();
    }
  }

  questionEl.addEventListener('input', updateControls);
  drugNameEl.addEventListener('input', updateControls);
  submitEl.addEventListener('click', () => void runQuery());
  browseEl.addEventListener('click', () => void browse());
  filterEl.addEventListener('input', () => {
    if (lastDrug) {
      drugPanelEl.innerHTML = renderDrugPanel(lastDrug, filterEl.value);
    }
  });
  updateControls();
}
