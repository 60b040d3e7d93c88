// Dashboard wiring: a setup form to open a session, then the weekly
// loop of estimate entry, belief inspection, what-if review and
// announcement commit. Refreshing the page restores the session named
// in the URL hash.

import { ApiClient, ApiError, WhatIfEntry } from './api.js'
import { BeliefHistogram, Timeline } from './charts.js'
import { SessionStore } from './store.js'

const api = new ApiClient('')
const store = new SessionStore(api)

const app = document.getElementById('app') as HTMLDivElement
const histogram = new BeliefHistogram()
const timeline = new Timeline()

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, cls?: string, text?: string): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag)
    if (cls) node.className = cls
    if (text !== undefined) node.textContent = text
    return node
}

function errorBanner(message: string): HTMLDivElement {
    const banner = el('div', 'error', message)
    return banner
}

function fmtPercent(p: number): string {
    return `${(p * 100).toFixed(1)}%`
}

function fmtValue(v: number | null): string {
    return v === null ? 'n/a' : v.toFixed(2)
}

async function renderSetup(error?: string) {
    app.replaceChildren()
    const form = el('div', 'setup')
    form.appendChild(el('h1', undefined, 'Announcement advisor'))
    if (error) form.appendChild(errorBanner(error))

    const presetLabel = el('label', undefined, 'Project size ')
    const preset = el('select')
    for (const name of ['small', 'medium', 'large', 'extra-large']) {
        const opt = el('option', undefined, name)
        opt.value = name
        preset.appendChild(opt)
    }
    presetLabel.appendChild(preset)

    const policyLabel = el('label', undefined, 'Policy ')
    const policy = el('select')
    for (const name of ['qmdp', 'sarsop', 'mostlikely', 'observedtime']) {
        const opt = el('option', undefined, name)
        opt.value = name
        policy.appendChild(opt)
    }
    policyLabel.appendChild(policy)

    const start = el('button', undefined, 'Start session')
    start.addEventListener('click', async () => {
        start.disabled = true
        try {
            const id = await store.create({ policy: policy.value, config_name: preset.value })
            window.location.hash = `session=${id}`
            await renderWeekly()
        } catch (err) {
            const detail = err instanceof ApiError ? err.message : String(err)
            await renderSetup(detail)
        }
    })

    form.append(presetLabel, policyLabel, start)
    app.appendChild(form)
}

function whatIfTable(entries: WhatIfEntry[], onPick: (a: number) => void): HTMLTableElement {
    const table = el('table', 'whatif')
    const head = el('tr')
    for (const title of ['announce', 'expected value', '']) head.appendChild(el('th', undefined, title))
    table.appendChild(head)
    for (const entry of entries) {
        const row = el('tr')
        const label = entry.keep_previous ? `${entry.action} (keep)` : String(entry.action)
        row.appendChild(el('td', undefined, label))
        row.appendChild(el('td', undefined, fmtValue(entry.expected_value)))
        const cell = el('td')
        const pick = el('button', undefined, 'announce')
        pick.addEventListener('click', () => onPick(entry.action))
        cell.appendChild(pick)
        row.appendChild(cell)
        table.appendChild(row)
    }
    return table
}

async function renderWeekly(error?: string) {
    const view = store.view
    if (!view) return renderSetup()
    app.replaceChildren()

    const header = el('div', 'header')
    header.appendChild(el('h1', undefined, `Week ${view.clock} of [${view.config.t_min}, ${view.config.t_max}]`))
    header.appendChild(el('div', 'meta',
        `policy ${view.policy} | session ${view.id.slice(0, 8)} | ${view.status}`))
    app.appendChild(header)
    if (error) app.appendChild(errorBanner(error))

    const awaitingEstimate = view.phase === 'awaiting_observation' && view.status === 'active'

    // estimate entry
    const entry = el('div', 'entry')
    const estimate = el('input')
    estimate.type = 'number'
    estimate.min = String(view.config.t_min)
    estimate.max = String(view.config.t_max)
    estimate.placeholder = 'team estimate (weeks)'
    const completed = el('input')
    completed.type = 'checkbox'
    const completedLabel = el('label', undefined, ' project completed this week')
    completedLabel.prepend(completed)
    const submit = el('button', undefined, 'Submit estimate')
    submit.disabled = !awaitingEstimate
    estimate.disabled = !awaitingEstimate
    completed.disabled = !awaitingEstimate
    submit.addEventListener('click', async () => {
        const value = Number(estimate.value)
        if (!Number.isInteger(value)) return renderWeekly('enter a whole number of weeks')
        try {
            await store.submitEstimate(value, completed.checked)
            await renderWeekly()
        } catch (err) {
            const detail = err instanceof ApiError ? err.message : String(err)
            await renderWeekly(detail)
        }
    })
    entry.append(estimate, completedLabel, submit)
    app.appendChild(entry)

    // recommendation badge and what-if panel
    if (view.phase === 'awaiting_announcement' && store.recommendation !== null) {
        const rec = el('div', 'recommendation',
            `recommended announcement: ${store.recommendation}`)
        app.appendChild(rec)
        app.appendChild(whatIfTable(store.whatIf, async (action) => {
            try {
                await store.commitAnnouncement(action)
                await renderWeekly()
            } catch (err) {
                const detail = err instanceof ApiError ? err.message : String(err)
                await renderWeekly(detail)
            }
        }))
    }

    // belief histogram: payload values only
    const beliefTitle = el('h2', undefined, 'Belief over completion week')
    const total = store.belief.reduce((acc, p) => acc + p.probability, 0)
    const beliefMeta = el('div', 'meta', `total ${fmtPercent(total)}`)
    app.append(beliefTitle, beliefMeta, histogram.root)
    histogram.render(store.belief, store.recommendation)

    const timelineTitle = el('h2', undefined, 'Estimates and announcements')
    app.append(timelineTitle, timeline.root)
    timeline.render(store.timeline, view.config.t_min!, view.config.t_max!)

    if (view.status === 'completed') {
        app.appendChild(el('div', 'done', 'Project completed. Start a new session from the setup page.'))
    }
}

async function boot() {
    const match = window.location.hash.match(/session=([0-9a-f]+)/)
    if (match) {
        try {
            await store.restore(match[1]!)
            await renderWeekly()
            return
        } catch {
            // fall through to setup
        }
    }
    await renderSetup()
}

void boot()
